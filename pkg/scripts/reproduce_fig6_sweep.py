#!/usr/bin/env python3
"""Cost sweep under imperfect acknowledgments (eta=0.4, delta=0.1).

Compares the Bayes-estimate suboptimal policy against the point-based
belief-DP policy over p in [0.1, 0.9]; the gap closes at large p.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from remest.cli import main as cli_main  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config",
                    default=str(ROOT / "configs" / "paper_imperfect.json"))
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--out", default="fig6_sweep.csv")
    args = ap.parse_args()
    return cli_main([
        "sweep", "--config", args.config,
        "--p-min", "0.1", "--p-max", "0.9", "--p-steps", "9",
        "--policies", "suboptimal,belief",
        "--runs", str(args.runs), "--out", args.out,
    ])


if __name__ == "__main__":
    sys.exit(main())
