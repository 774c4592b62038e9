#!/usr/bin/env python3
"""DP threshold versus SPSA-recovered threshold across loss probabilities."""

import argparse
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from remest.channel import ForwardChannel  # noqa: E402
from remest.config import RunConfig, build_system  # noqa: E402
from remest.policy import (bellman_threshold_evaluator,  # noqa: E402
                           relative_value_iteration, spsa_multistart)

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "paper.json"))
    ap.add_argument("--p-values", default="0.1,0.2,0.3,0.4,0.5")
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    cfg = RunConfig.load(args.config)
    model, ss, plan, _, fb, aug, grid = build_system(cfg)
    lam, scale = cfg["cost.lambda"], cfg["cost.energy_scale"]
    print(f"{'p':>5} {'dp_threshold':>14} {'spsa_median':>12} {'cell':>8}")
    for p in (float(s) for s in args.p_values.split(",")):
        fwd = ForwardChannel.from_loss_prob(p, plan.n0, plan.n1,
                                            cfg["channel.N0"])
        table = relative_value_iteration(grid, lam, plan, fwd, aug,
                                         energy_scale=scale)
        ev = bellman_threshold_evaluator(grid, lam, plan, fwd, aug,
                                         horizon=cfg["spsa.horizon"],
                                         energy_scale=scale)
        finals = [spsa_multistart(ev, grid.lo, grid.hi,
                                  nstarts=cfg["spsa.starts"],
                                  iters=cfg["spsa.iters"],
                                  rng=np.random.default_rng(s))
                  for s in range(args.seeds)]
        print(f"{p:5.2f} {table.threshold:14.4f} "
              f"{float(np.median(finals)):12.4f} {grid.cell:8.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
