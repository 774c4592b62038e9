"""Command-line front end.

Subcommands: solve, sweep, simulate, threshold-search, validate.  All CSV
outputs carry `#` provenance comments (tool version, config hash, seed) and
numbers are printed with 12 significant digits.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .channel import ForwardChannel
from .config import RunConfig, build_system
from .errors import ConfigError, NonConvergence, RemestError
from .policy import (bellman_threshold_evaluator, mc_threshold_evaluator,
                     relative_value_iteration, spsa_multistart,
                     spsa_threshold_search)
from .simulate import (BeliefDriven, EpisodeConfig, Fixed, Suboptimal, Table,
                       Threshold, run_episode, sweep)

EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def _write_csv(f, cfg, header, rows):
    f.write(f"# remest {__version__}\n")
    f.write(f"# config_hash={cfg.hash}\n")
    f.write(f"# seed={cfg['sim.seed']}\n")
    f.write(",".join(header) + "\n")
    for row in rows:
        f.write(",".join(_fmt(v) for v in row) + "\n")


def _policy_from_config(cfg, grid, plan, fwd, fb, aug):
    kind = cfg["policy.kind"]
    if kind == "fixed0":
        return Fixed(0)
    if kind == "fixed1":
        return Fixed(1)
    if kind == "threshold":
        return Threshold(cfg["policy.phi"])
    table = relative_value_iteration(
        grid, cfg["cost.lambda"], plan, fwd, aug, tol=cfg["solver.tol"],
        max_iter=cfg["solver.max_iter"], successor=cfg["solver.successor"],
        energy_scale=cfg["cost.energy_scale"])
    if kind == "optimal":
        return Table(table)
    if kind == "suboptimal":
        return Suboptimal(table=table)
    from .policy import belief_value_iteration
    rng = np.random.default_rng(cfg["sim.seed"])
    bp = belief_value_iteration(grid, cfg["cost.lambda"], plan, fwd, fb, aug,
                                horizon=cfg["belief.horizon"],
                                samples=cfg["belief.samples"], rng=rng,
                                energy_scale=cfg["cost.energy_scale"])
    return BeliefDriven(bp)


def cmd_solve(args):
    cfg = RunConfig.load(args.config)
    model, ss, plan, fwd, fb, aug, grid = build_system(cfg)
    table = relative_value_iteration(
        grid, cfg["cost.lambda"], plan, fwd, aug, tol=cfg["solver.tol"],
        max_iter=cfg["solver.max_iter"], successor=cfg["solver.successor"],
        energy_scale=cfg["cost.energy_scale"])
    scalars = [
        ("P_s", np.trace(ss.P_s)), ("K_f", ss.K_f[0, 0]),
        ("K_s", ss.K_s[0, 0]), ("Sigma_s", np.trace(ss.Sigma_s)),
        ("n0", plan.n0), ("n1", plan.n1),
        ("p_b0", fwd.p_b0), ("p_b1", fwd.p_b1),
        ("E_b0", fwd.E_b0), ("E_b1", fwd.E_b1),
        ("rho", table.rho), ("threshold", table.threshold),
    ]
    for name, v in scalars:
        print(f"{name}={_fmt(v)}")
    f = _open_out(args.out)
    try:
        _write_csv(f, cfg, ["P11", "H", "action"],
                   zip(grid.points, table.H, table.action))
    finally:
        if f is not sys.stdout:
            f.close()
    return 0


def cmd_sweep(args):
    cfg = RunConfig.load(args.config)
    model, ss, plan, fwd, fb, aug, grid = build_system(cfg)
    policies = [s for s in args.policies.split(",") if s]
    if not policies:
        raise ConfigError("policy list must not be empty")
    p_values = np.linspace(args.p_min, args.p_max, args.p_steps)
    rows = sweep(model, ss, plan, fb, cfg["cost.lambda"], cfg["channel.N0"],
                 p_values, policies, runs=args.runs, T=cfg["sim.steps"],
                 base_seed=cfg["sim.seed"], burn_in=cfg["sim.burn_in"],
                 energy_scale=cfg["cost.energy_scale"], grid=grid,
                 solver_kwargs={"tol": cfg["solver.tol"],
                                "max_iter": cfg["solver.max_iter"],
                                "successor": cfg["solver.successor"]},
                 belief_kwargs={"horizon": cfg["belief.horizon"],
                                "samples": cfg["belief.samples"]},
                 workers=args.workers)
    f = _open_out(args.out)
    try:
        _write_csv(f, cfg,
                   ["p", "policy", "avg_cost", "avg_est_var", "avg_energy",
                    "stderr_cost"],
                   [(r["p"], r["policy"], r["avg_cost"], r["avg_est_var"],
                     r["avg_energy"], r["stderr_cost"]) for r in rows])
    finally:
        if f is not sys.stdout:
            f.close()
    return 0


def cmd_simulate(args):
    cfg = RunConfig.load(args.config)
    model, ss, plan, fwd, fb, aug, grid = build_system(cfg)
    policy = _policy_from_config(cfg, grid, plan, fwd, fb, aug)
    ep = EpisodeConfig(model=model, ss=ss, plan=plan, fwd=fwd, fb=fb,
                       lam=cfg["cost.lambda"], policy=policy,
                       T=cfg["sim.steps"], seed=cfg["sim.seed"],
                       burn_in=cfg["sim.burn_in"],
                       energy_scale=cfg["cost.energy_scale"],
                       record_trace=args.trace)
    res = run_episode(ep)
    print(f"avg_cost={_fmt(res.avg_cost)}")
    print(f"avg_est_var={_fmt(res.avg_est_var)}")
    print(f"avg_energy={_fmt(res.avg_energy)}")
    if args.trace:
        f = _open_out(args.out)
        try:
            _write_csv(f, cfg,
                       ["k", "P11", "Phat11", "nu", "gamma", "gammahat",
                        "stage_cost"],
                       [(k, *row) for k, row in enumerate(res.trace)])
        finally:
            if f is not sys.stdout:
                f.close()
    return 0


def cmd_threshold_search(args):
    cfg = RunConfig.load(args.config)
    model, ss, plan, fwd, fb, aug, grid = build_system(cfg)
    lam = cfg["cost.lambda"]
    scale = cfg["cost.energy_scale"]
    if cfg["spsa.evaluator"] == "bellman":
        evaluator = bellman_threshold_evaluator(grid, lam, plan, fwd, aug,
                                                horizon=cfg["spsa.horizon"],
                                                energy_scale=scale)
    else:
        evaluator = mc_threshold_evaluator(grid, lam, plan, fwd, aug,
                                           energy_scale=scale,
                                           seed=cfg["sim.seed"])
    rng = np.random.default_rng(cfg["sim.seed"])
    lo, hi = grid.points[0], grid.points[-1]
    phi = spsa_multistart(evaluator, lo, hi, nstarts=cfg["spsa.starts"],
                          iters=cfg["spsa.iters"], rng=rng,
                          omega=cfg["spsa.omega"], sigma=cfg["spsa.sigma"],
                          kappa=cfg["spsa.kappa"])
    # rerun from the found point to record the local trajectory
    trace = []
    phi_final = spsa_threshold_search(evaluator, phi, omega=cfg["spsa.omega"],
                                      sigma=cfg["spsa.sigma"],
                                      kappa=cfg["spsa.kappa"],
                                      iters=cfg["spsa.iters"],
                                      rng=np.random.default_rng(cfg["sim.seed"]),
                                      lo=lo, hi=hi, trace=trace)
    if evaluator(phi) < evaluator(phi_final):
        phi_final = phi
    f = _open_out(args.out)
    try:
        _write_csv(f, cfg, ["iteration", "phi", "cost"], trace)
    finally:
        if f is not sys.stdout:
            f.close()
    print(f"phi_star={_fmt(phi_final)}")
    return 0


def cmd_validate(args):
    from .validate import run_checks
    cfg = RunConfig.load(args.config)
    checks = run_checks(cfg, level=args.level)
    failed = 0
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        print(f"{status} {name}: {detail}")
        failed += 0 if ok else 1
    if failed:
        print(f"{failed} invariant check(s) failed", file=sys.stderr)
        return 1
    print(f"all {len(checks)} invariant checks passed")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="remest",
        description="Remote state estimation over a lossy channel: policy "
                    "solving, threshold search, Monte Carlo simulation.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the average-cost DP and report "
                                     "model/channel constants")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="-")
    s.set_defaults(fn=cmd_solve)

    s = sub.add_parser("sweep", help="Monte Carlo cost sweep over packet "
                                     "loss probabilities")
    s.add_argument("--config", required=True)
    s.add_argument("--p-min", type=float, default=0.1)
    s.add_argument("--p-max", type=float, default=0.9)
    s.add_argument("--p-steps", type=int, default=9)
    s.add_argument("--policies", required=True,
                   help="comma list: fixed0,fixed1,threshold:<phi>,optimal,"
                        "suboptimal,belief")
    s.add_argument("--runs", type=int, default=50)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--out", default="-")
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("simulate", help="run one seeded episode")
    s.add_argument("--config", required=True)
    s.add_argument("--trace", action="store_true")
    s.add_argument("--out", default="-")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("threshold-search", help="SPSA search for the "
                                                "threshold parameter")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="-")
    s.set_defaults(fn=cmd_threshold_search)

    s = sub.add_parser("validate", help="run the invariant suites")
    s.add_argument("--config", required=True)
    s.add_argument("--level", choices=("fast", "full"), default="fast")
    s.set_defaults(fn=cmd_validate)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except RemestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
