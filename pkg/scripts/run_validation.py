"""Invariant suite: kernel properties, existence condition, mass/positivity.

Exits nonzero if any invariant fails; details land in validation.json.
"""

import argparse
import sys
from pathlib import Path

from hk_chaos.harness import ExperimentConfig, run
from hk_chaos.particles import NumericalBlowup


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/validate")
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    cfg = ExperimentConfig(experiment="validate", seed=args.seed)
    try:
        out = run(cfg, Path(args.out))
    except NumericalBlowup as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return 3
    print(f"all invariants passed; summary in {out / 'validation.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
