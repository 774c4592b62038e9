#!/usr/bin/env python3
"""Single seeded episode with per-step trace (error variance, decisions).

The trace CSV shows the bursts of nu=1 transmissions that follow runs of
consecutive packet drops under the optimal threshold policy.
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
    ap.add_argument("--out", default="trace.csv")
    args = ap.parse_args()
    return cli_main(["simulate", "--config", args.config, "--trace",
                     "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
