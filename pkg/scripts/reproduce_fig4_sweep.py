#!/usr/bin/env python3
"""Cost-versus-loss-probability sweep, perfect acknowledgments.

Compares the always-send-innovation, always-send-estimate and DP-optimal
policies over p in [0.1, 0.9] and writes a plot-ready CSV.  Render with,
e.g.:

    python3 scripts/reproduce_fig4_sweep.py --out sweep.csv
    # then plot avg_cost vs p per policy with your tool of choice
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from remest.cli import main as cli_main  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "paper.json"))
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--out", default="fig4_sweep.csv")
    args = ap.parse_args()
    return cli_main([
        "sweep", "--config", args.config,
        "--p-min", "0.1", "--p-max", "0.9", "--p-steps", "9",
        "--policies", "fixed0,fixed1,optimal",
        "--runs", str(args.runs), "--out", args.out,
    ])


if __name__ == "__main__":
    sys.exit(main())
