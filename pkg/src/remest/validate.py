"""Invariant suites behind the `validate` CLI subcommand.

Each check returns (name, passed, detail).  The fast level uses reduced
sample counts; full matches the sizes used in the acceptance tests.
"""

from __future__ import annotations

import numpy as np

from .augmented import AugmentedModel, StructuredCov, project, riccati_step
from .channel import (FeedbackChannel, ForwardChannel,
                      bit_error_from_energy, bit_error_from_packet_loss,
                      energy_from_bit_error, packet_loss_from_bit_error)
from .config import build_system
from .errors import RemestError
from .lti import dare_residual, lyapunov_residual
from .policy import (CovEstimate, belief_from_point, belief_update,
                     relative_value_iteration, shared_R_kernel,
                     suboptimal_estimate_update)
from .quantizer import alpha_of_rate


def run_checks(cfg, level="fast"):
    model, ss, plan, fwd, fb, aug, grid = build_system(cfg)
    big = level == "full"
    checks = []

    r = np.abs(dare_residual(ss.P_s, model)).max()
    checks.append(("dare-residual", r < 1e-9, f"max |residual| = {r:.3g}"))
    r = np.abs(lyapunov_residual(ss.Sigma_s, model, ss)).max()
    checks.append(("lyapunov-residual", r < 1e-9, f"max |residual| = {r:.3g}"))

    dev = max(abs(packet_loss_from_bit_error(
        bit_error_from_packet_loss(p, n), n) - p)
        for p in (0.05, 0.2, 0.5, 0.9) for n in (plan.n0, plan.n1))
    checks.append(("channel-loss-roundtrip", dev < 1e-12, f"max dev = {dev:.3g}"))
    dev = max(abs(bit_error_from_energy(
        energy_from_bit_error(pb, fwd.N0), fwd.N0) - pb)
        for pb in (0.01, 0.07, 0.2, 0.4))
    checks.append(("channel-energy-roundtrip", dev < 1e-10, f"max dev = {dev:.3g}"))

    from .quantizer import QuantizerSpec, Family, _rate_for_alpha
    spec = QuantizerSpec(family=Family(cfg["quantizer.family"]))
    ok = all(_rate_for_alpha(spec, alpha_of_rate(spec, n)) <= n
             for n in range(1, 17))
    checks.append(("quantizer-rate-roundtrip", ok,
                   "rate_for_alpha(alpha_of_rate(n)) <= n for n in 1..16"))

    rng = np.random.default_rng(7)
    steps = 20_000 if big else 2_000
    worst = 0.0
    P11 = float(np.trace(ss.P_s)) + rng.random()
    P = StructuredCov(P11=[[P11]], Ps=aug.Ps).full()
    for _ in range(steps):
        gamma = int(rng.random() < 0.5)
        nu = int(rng.random() < 0.5)
        P = riccati_step(P, gamma, nu, aug)
        try:
            project(P, aug.Ps, tol=1e-9)
        except RemestError as exc:
            worst = max(worst, getattr(exc, "max_deviation", np.inf))
    checks.append(("structured-class-closure", worst == 0.0,
                   f"{steps} random steps, max deviation {worst:.3g}"))

    kern = shared_R_kernel(aug, plan.target_trace)
    g = np.linspace(kern.Ps, grid.hi, 200 if big else 60)
    F = {nu: np.array([kern.expected(q, nu, fwd.p) for q in g]) for nu in (0, 1)}
    lhs = F[1][:, None] + F[0][None, :]
    rhs = F[0][:, None] + F[1][None, :]
    mask = g[:, None] >= g[None, :]
    viol = float((lhs - rhs)[mask].max())
    checks.append(("submodularity", viol <= 1e-12,
                   f"max cross-difference = {viol:.3g}"))

    table = relative_value_iteration(grid, cfg["cost.lambda"], plan, fwd,
                                     aug, tol=cfg["solver.tol"],
                                     max_iter=cfg["solver.max_iter"],
                                     successor=cfg["solver.successor"],
                                     energy_scale=cfg["cost.energy_scale"])
    mono = bool(np.all(np.diff(table.action) >= 0))
    checks.append(("dp-threshold-structure", mono,
                   f"threshold = {table.threshold:.6g}, rho = {table.rho:.6g}"))
    d2 = np.diff(table.H, 2)
    checks.append(("dp-value-concavity", bool(np.all(d2 <= 1e-8)),
                   f"max second difference = {d2.max():.3g}"))

    fb0 = FeedbackChannel(eta=0.0, delta=0.0)
    steps = 100_000 if big else 2_000
    P = float(np.trace(ss.P_s))
    est = CovEstimate(P11=[[P]])
    b = belief_from_point(P, grid)
    exact = True
    point = True
    k = aug.scalar
    for i in range(steps):
        gamma = int(rng.random() >= fwd.p)
        nu = int(rng.random() < 0.5)
        P = k.step(P, gamma, nu)
        est = suboptimal_estimate_update(est, gamma, nu, fwd, fb0, aug)
        b = belief_update(b, gamma, nu, grid, fwd, fb0, aug)
        exact = exact and est.P11[0, 0] == P and b.atom == P
        point = point and b.is_point_mass()
    checks.append(("perfect-ack-degeneracy", exact and point,
                   f"{steps} steps, estimate bit-equal and belief point mass"))
    return checks
