"""Monte Carlo engine: plant -> sensor filter -> quantize -> forward channel
-> receiver filter -> feedback channel -> policy loop."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .augmented import AugmentedModel, riccati_step, receiver_estimate_step
from .channel import ForwardChannel, packet_energy
from .errors import ConfigError
from .policy import (BeliefPolicy, CovEstimate, CovGrid, PolicyTable,
                     belief_value_iteration, relative_value_iteration,
                     suboptimal_estimate_update)

SUBSTREAMS = ("plant", "measurement", "quantizer", "forward", "feedback")


# Policy wrappers ----------------------------------------------------------

@dataclass(frozen=True)
class Fixed:
    """Constant transmit decision."""
    nu: int


@dataclass(frozen=True)
class Threshold:
    """Send the state estimate once the (true) error variance exceeds phi."""
    phi: float


@dataclass(frozen=True)
class Table:
    """Greedy DP policy applied to the true error variance."""
    table: PolicyTable


@dataclass(frozen=True)
class Suboptimal:
    """DP/threshold decision applied to the sensor's Bayes covariance
    estimate instead of the (unknown) true covariance."""
    table: Optional[PolicyTable] = None
    phi: Optional[float] = None


@dataclass(frozen=True)
class BeliefDriven:
    """Point-based belief-DP policy over the information state."""
    policy: BeliefPolicy


@dataclass(frozen=True)
class EpisodeConfig:
    model: object
    ss: object
    plan: object
    fwd: ForwardChannel
    fb: object
    lam: float
    policy: object
    T: int
    seed: int
    burn_in: float = 0.1
    energy_scale: float = 1.0
    record_trace: bool = False

    def __post_init__(self):
        if self.T < 1:
            raise ConfigError("horizon must be at least one step")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lambda must lie in [0, 1]")
        if not 0.0 <= self.burn_in < 1.0:
            raise ConfigError("burn-in fraction must lie in [0, 1)")


@dataclass(frozen=True)
class EpisodeResult:
    avg_cost: float
    avg_est_var: float
    avg_energy: float
    trace: Optional[np.ndarray] = field(default=None, compare=False)

    @classmethod
    def of(cls, lam, avg_est_var, avg_energy, trace=None):
        # compose the combined cost from its parts so the decomposition
        # identity holds exactly, not just to summation round-off
        return cls(avg_cost=lam * avg_est_var + (1.0 - lam) * avg_energy,
                   avg_est_var=avg_est_var, avg_energy=avg_energy, trace=trace)


def _substreams(seed, T):
    children = np.random.SeedSequence(seed).spawn(len(SUBSTREAMS))
    gens = {name: np.random.default_rng(s) for name, s in zip(SUBSTREAMS, children)}
    return {
        "w": gens["plant"].standard_normal(T),
        "v": gens["measurement"].standard_normal(T),
        "q": gens["quantizer"].standard_normal(T),
        "u_fwd": gens["forward"].random(T),
        "u_fb": gens["feedback"].random(T),
    }


def _dec_encoding(policy):
    """(dec_mode, info_mode, phi, grid, action) for the compiled kernel."""
    empty = np.zeros(2)
    if isinstance(policy, Fixed):
        return policy.nu, 0, 0.0, empty, empty
    if isinstance(policy, Threshold):
        return 2, 0, float(policy.phi), empty, empty
    if isinstance(policy, Table):
        t = policy.table
        return 3, 0, 0.0, t.grid.points, t.action.astype(float)
    if isinstance(policy, Suboptimal):
        if policy.table is not None:
            t = policy.table
            return 3, 1, 0.0, t.grid.points, t.action.astype(float)
        return 2, 1, float(policy.phi), empty, empty
    raise ConfigError(f"unsupported policy {policy!r}")


def run_episode(cfg: EpisodeConfig) -> EpisodeResult:
    """Simulate one seeded episode; bit-identical replay under a fixed seed."""
    aug = AugmentedModel.build(cfg.model, cfg.ss, cfg.plan)
    if aug.scalar is None:
        return _run_episode_matrix(cfg, aug)
    return _run_episode_scalar(cfg, aug)


def _scalar_params(cfg, aug):
    k = aug.scalar
    m = cfg.model
    return dict(
        a=k.a, c=k.c,
        sw_std=math.sqrt(float(m.Sigma_w[0, 0])),
        sv_std=math.sqrt(float(m.Sigma_v[0, 0])),
        Ps=k.Ps, Kf=k.Kf, Ks=float(cfg.ss.K_s[0, 0]),
        R0=k.R0, R1=k.R1,
        sq0_std=math.sqrt(float(cfg.plan.Sigma_q_eps[0, 0])),
        sq1_std=math.sqrt(float(cfg.plan.Sigma_q_x[0, 0])),
        p=cfg.fwd.p, Amat=cfg.fb.Amat, lam=cfg.lam,
        J0=packet_energy(cfg.plan, cfg.fwd, 0) * cfg.energy_scale,
        J1=packet_energy(cfg.plan, cfg.fwd, 1) * cfg.energy_scale,
    )


def _initial_P11(cfg):
    # start in the Theorem-1 class: use P_x0 if it is at least the
    # steady-state variance, else start at the steady state itself
    Ps = float(np.trace(cfg.ss.P_s))
    P0 = float(np.trace(cfg.model.P_x0))
    return P0 if P0 >= Ps else Ps


def _run_episode_scalar(cfg, aug):
    par = _scalar_params(cfg, aug)
    noise = _substreams(cfg.seed, cfg.T)
    burn = int(cfg.burn_in * cfg.T)
    P0 = _initial_P11(cfg)
    x0 = float(cfg.model.x0_mean[0])
    trace = np.zeros((cfg.T if cfg.record_trace else 0, 6))
    if isinstance(cfg.policy, BeliefDriven):
        if cfg.record_trace:
            raise ConfigError("trace recording is not supported for the "
                              "belief-driven policy")
        bp = cfg.policy.policy
        grid = bp.grid
        k = aug.scalar
        succ_idx = np.zeros((2, 2, grid.count), dtype=np.int64)
        succ_frac = np.zeros((2, 2, grid.count))
        for gamma in (0, 1):
            for nu in (0, 1):
                vals = np.array([k.step(q, gamma, nu) for q in grid.points])
                idx, frac = grid.split(vals)
                succ_idx[gamma, nu] = idx
                succ_frac[gamma, nu] = frac
        _, avg_v, avg_e = _kernels.belief_episode(
            par["a"], par["c"], par["sw_std"], par["sv_std"], par["Ps"],
            par["Kf"], par["Ks"], par["R0"], par["R1"], par["sq0_std"],
            par["sq1_std"], par["p"], par["Amat"], par["lam"], par["J0"],
            par["J1"], grid.points, bp.beliefs, bp.actions.astype(np.int64),
            succ_idx, succ_frac, P0, x0, cfg.T, burn,
            noise["w"], noise["v"], noise["q"], noise["u_fwd"], noise["u_fb"])
        return EpisodeResult.of(cfg.lam, avg_v, avg_e)
    dec_mode, info_mode, phi, grid, action = _dec_encoding(cfg.policy)
    _, avg_v, avg_e = _kernels.scalar_episode(
        par["a"], par["c"], par["sw_std"], par["sv_std"], par["Ps"],
        par["Kf"], par["Ks"], par["R0"], par["R1"], par["sq0_std"],
        par["sq1_std"], par["p"], par["Amat"], par["lam"], par["J0"],
        par["J1"], dec_mode, info_mode, phi, grid, action,
        P0, P0, x0, cfg.T, burn,
        noise["w"], noise["v"], noise["q"], noise["u_fwd"], noise["u_fb"],
        trace)
    return EpisodeResult.of(cfg.lam, avg_v, avg_e,
                            trace=trace if cfg.record_trace else None)


def _run_episode_matrix(cfg, aug):
    """General-n reference path; slower, used for vector models and tests."""
    if isinstance(cfg.policy, BeliefDriven):
        raise ConfigError("belief-driven policy requires a scalar model")
    from .lti import sensor_filter_step
    from .quantizer import quantize
    m, ss, plan, fwd, fb = cfg.model, cfg.ss, cfg.plan, cfg.fwd, cfg.fb
    n = m.n
    noise_gen = {name: np.random.default_rng(s) for name, s in
                 zip(SUBSTREAMS, np.random.SeedSequence(cfg.seed).spawn(5))}
    from .lti import cholesky_factor
    w_chol = cholesky_factor(m.Sigma_w)
    v_chol = cholesky_factor(m.Sigma_v)
    qx_chol = cholesky_factor(plan.Sigma_q_x)
    qe_chol = cholesky_factor(plan.Sigma_q_eps)
    Ps = aug.Ps
    P11 = cfg.model.P_x0 if np.all(np.linalg.eigvalsh(cfg.model.P_x0 - Ps) >= -1e-12) else Ps.copy()
    from .augmented import StructuredCov
    P = StructuredCov(P11=P11, Ps=Ps).full()
    Phat = CovEstimate(P11=P11.copy())
    x = m.x0_mean.copy()
    xs = np.zeros(n)
    theta = np.zeros(2 * n)
    burn = int(cfg.burn_in * cfg.T)
    J = (packet_energy(plan, fwd, 0) * cfg.energy_scale,
         packet_energy(plan, fwd, 1) * cfg.energy_scale)
    rows = []
    acc_v = 0.0
    acc_e = 0.0
    cnt = 0
    for k in range(cfg.T):
        v = v_chol @ noise_gen["measurement"].standard_normal(n)
        y = m.C @ x + v
        xf = xs + ss.K_f @ (y - m.C @ xs)
        innov = xf - xs

        if isinstance(cfg.policy, Fixed):
            nu = cfg.policy.nu
        elif isinstance(cfg.policy, Threshold):
            nu = int(float(np.trace(P[:n, :n])) > cfg.policy.phi)
        elif isinstance(cfg.policy, Table):
            nu = cfg.policy.table.decide(np.trace(P[:n, :n]))
        elif isinstance(cfg.policy, Suboptimal):
            info = Phat.trace
            nu = (cfg.policy.table.decide(info) if cfg.policy.table is not None
                  else int(info > cfg.policy.phi))
        else:
            raise ConfigError(f"unsupported policy {cfg.policy!r}")

        qn = noise_gen["quantizer"].standard_normal(n)
        z = (xf + qx_chol @ qn) if nu else (innov + qe_chol @ qn)
        gamma = int(noise_gen["forward"].random() >= fwd.p)

        theta = receiver_estimate_step(theta, P, z, gamma, nu, aug)
        P = riccati_step(P, gamma, nu, aug)

        u = noise_gen["feedback"].random()
        row = fb.Amat[gamma]
        gh = 0 if u < row[0] else (1 if u < row[0] + row[1] else 2)
        if isinstance(cfg.policy, Suboptimal):
            Phat = suboptimal_estimate_update(Phat, gh, nu, fwd, fb, aug)

        var = float(np.trace(P[:n, :n]))
        e = J[nu]
        if k >= burn:
            acc_v += var
            acc_e += e
            cnt += 1
        if cfg.record_trace:
            rows.append((var, Phat.trace, nu, gamma, gh,
                         cfg.lam * var + (1 - cfg.lam) * e))
        x = m.A @ x + w_chol @ noise_gen["plant"].standard_normal(n)
        xs = m.A @ xf
    trace = np.array(rows) if cfg.record_trace else None
    return EpisodeResult.of(cfg.lam, acc_v / cnt, acc_e / cnt, trace=trace)


# Sweeps -------------------------------------------------------------------

def sweep(model, ss, plan, fb, lam, N0, p_values, policies, runs, T,
          base_seed=0, burn_in=0.1, energy_scale=1.0, grid=None,
          solver_kwargs=None, belief_kwargs=None, workers=None):
    """Mean +- standard error of episode aggregates per (p, policy) cell.

    `policies` entries are either concrete policy objects (reused across p)
    or the strings "fixed0", "fixed1", "threshold:<phi>", "optimal",
    "suboptimal", "belief"; solver-backed names are re-solved at each p.
    Output rows are sorted by (p, policy) regardless of scheduling.
    """
    if not policies:
        raise ConfigError("policy list must not be empty")
    solver_kwargs = dict(solver_kwargs or {})
    belief_kwargs = dict(belief_kwargs or {})
    if grid is None:
        grid = CovGrid.build(ss, count=solver_kwargs.pop("grid_count", 40),
                             lo=solver_kwargs.pop("grid_lo", None),
                             hi=solver_kwargs.pop("grid_hi", None))
    aug_cache = {}

    def build_policy(name, p, fwd, pi):
        if not isinstance(name, str):
            return name
        if name == "fixed0":
            return Fixed(0)
        if name == "fixed1":
            return Fixed(1)
        if name.startswith("threshold:"):
            return Threshold(float(name.split(":", 1)[1]))
        aug = aug_cache.setdefault("aug", AugmentedModel.build(model, ss, plan))
        if name in ("optimal", "suboptimal"):
            table = relative_value_iteration(grid, lam, plan, fwd, aug,
                                             energy_scale=energy_scale,
                                             **solver_kwargs)
            return Table(table) if name == "optimal" else Suboptimal(table=table)
        if name == "belief":
            rng = np.random.default_rng(np.random.SeedSequence([base_seed, 97, pi]))
            bp = belief_value_iteration(grid, lam, plan, fwd, fb, aug,
                                        rng=rng, energy_scale=energy_scale,
                                        **belief_kwargs)
            return BeliefDriven(bp)
        raise ConfigError(f"unknown policy name {name!r}")

    cells = []
    for pi, p in enumerate(sorted(p_values)):
        fwd = ForwardChannel.from_loss_prob(p, plan.n0, plan.n1, N0)
        for poli, name in enumerate(policies):
            pol = build_policy(name, p, fwd, pi)
            cfgs = [EpisodeConfig(model=model, ss=ss, plan=plan, fwd=fwd,
                                  fb=fb, lam=lam, policy=pol, T=T,
                                  seed=_cell_seed(base_seed, pi, poli, r),
                                  burn_in=burn_in, energy_scale=energy_scale)
                    for r in range(runs)]
            cells.append((p, str(name), cfgs))

    def run_cell(cell):
        p, name, cfgs = cell
        results = [run_episode(c) for c in cfgs]
        costs = [r.avg_cost for r in results]
        mean = math.fsum(costs) / len(costs)
        var = math.fsum((c - mean) ** 2 for c in costs) / max(len(costs) - 1, 1)
        return {
            "p": p, "policy": name,
            "avg_cost": mean,
            "avg_est_var": math.fsum(r.avg_est_var for r in results) / len(results),
            "avg_energy": math.fsum(r.avg_energy for r in results) / len(results),
            "stderr_cost": math.sqrt(var / len(costs)),
        }

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]
    rows.sort(key=lambda r: (r["p"], r["policy"]))
    return rows


def _cell_seed(base_seed, pi, poli, r):
    # derived, collision-free, order-independent of scheduling
    return np.random.SeedSequence([base_seed, pi, poli, r]).generate_state(1)[0]


# Analytic cross-check -----------------------------------------------------

@dataclass(frozen=True)
class CovarianceReport:
    steps: np.ndarray
    empirical: np.ndarray
    analytic: np.ndarray
    max_rel_dev: float


def empirical_covariance_check(cfg: EpisodeConfig, runs, check_steps=None):
    """Cross-run sample variance of the receiver's estimation error versus
    the deterministic Riccati trajectory, under one common (gamma, nu)
    realization shared by all runs.  Scalar models only."""
    aug = AugmentedModel.build(cfg.model, cfg.ss, cfg.plan)
    if aug.scalar is None:
        raise ConfigError("covariance check implemented for scalar models")
    k = aug.scalar
    m = cfg.model
    T = cfg.T
    if check_steps is None:
        check_steps = np.arange(T // 2, T, max(T // 20, 1))
    check_steps = np.asarray(check_steps)
    sw = math.sqrt(float(m.Sigma_w[0, 0]))
    sv = math.sqrt(float(m.Sigma_v[0, 0]))
    sq = (math.sqrt(float(cfg.plan.Sigma_q_eps[0, 0])),
          math.sqrt(float(cfg.plan.Sigma_q_x[0, 0])))
    Ks = float(cfg.ss.K_s[0, 0])
    p = cfg.fwd.p
    rng = np.random.default_rng(cfg.seed)
    gamma_seq = (rng.random(T) >= p).astype(np.int64)

    # Start from the one initial condition whose true joint error
    # covariance lies exactly in the structured class: x0 ~ N(mean, P_s)
    # with a deterministic sensor prior, i.e. P11 = P_s.
    P0 = k.Ps
    P_traj = np.empty(T)
    nu_seq = np.empty(T, dtype=np.int64)
    P = P0
    for t in range(T):
        if isinstance(cfg.policy, Fixed):
            nu = cfg.policy.nu
        elif isinstance(cfg.policy, Threshold):
            nu = int(P > cfg.policy.phi)
        elif isinstance(cfg.policy, Table):
            nu = cfg.policy.table.decide(P)
        else:
            raise ConfigError("covariance check needs a perfect-ack policy")
        P = k.step(P, int(gamma_seq[t]), nu)
        P_traj[t] = P
        nu_seq[t] = nu

    # vectorized ensemble of plant/filter realizations
    x = float(cfg.model.x0_mean[0]) + math.sqrt(P0) * rng.standard_normal(runs)
    xs = np.zeros(runs)
    th1 = np.zeros(runs)
    th2 = np.zeros(runs)
    emp = np.empty(check_steps.size)
    ana = np.empty(check_steps.size)
    ci = 0
    a, c, Ps, Kf = k.a, k.c, k.Ps, k.Kf
    Pcur = P0
    for t in range(T):
        v = sv * rng.standard_normal(runs)
        y = c * x + v
        innov = Kf * (y - c * xs)
        xf = xs + innov
        nu = int(nu_seq[t])
        z = (xf if nu else innov) + sq[nu] * rng.standard_normal(runs)
        xt = Pcur - Ps
        num = nu * xt + Kf * c * Ps
        den = nu * xt + Kf * Kf * c * c * Ps + (k.R1 if nu else k.R0)
        pred1 = a * th1
        pred2 = Ks * c * th1 + (a - Ks * c) * th2
        if gamma_seq[t]:
            cth = (Kf * c * th1 + (1 - Kf * c) * th2) if nu else Kf * c * (th1 - th2)
            gK = a * num / den
            resid = z - cth
            th1 = pred1 + gK * resid
            th2 = pred2 + gK * resid
        else:
            th1, th2 = pred1, pred2
        Pcur = P_traj[t]
        x = a * x + sw * rng.standard_normal(runs)
        xs = a * xf
        if ci < check_steps.size and t == check_steps[ci]:
            err = x - th1
            emp[ci] = err.var(ddof=1)
            # P tracks the error of theta_{t+1} = (x_{t+1}, ...), which is
            # exactly the (x, th1) pair after the propagation above
            ana[ci] = P_traj[t]
            ci += 1

    rel = np.abs(emp - ana) / ana
    return CovarianceReport(steps=check_steps, empirical=emp, analytic=ana,
                            max_rel_dev=float(rel.max()))
