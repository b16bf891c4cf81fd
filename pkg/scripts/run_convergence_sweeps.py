"""Production convergence sweeps: weak error, strong coupling, density distance.

Writes one output directory per experiment with results.csv / rates.csv,
ready for the plotting frontend.  Expect roughly twenty minutes per
full-scale sweep on one core; use --replicas to scale down.
"""

import argparse
from pathlib import Path

from hk_chaos.harness import ExperimentConfig, run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/sweeps")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--replicas", type=int, default=200)
    parser.add_argument(
        "--experiments",
        default="chaos-weak,chaos-strong,density-distance",
        help="comma-separated subset to run",
    )
    args = parser.parse_args()

    for experiment in args.experiments.split(","):
        replicas = args.replicas if experiment.startswith("chaos") else min(args.replicas, 20)
        cfg = ExperimentConfig(
            experiment=experiment,
            seed=args.seed,
            threads=args.threads,
            replicas=replicas,
        )
        out = run(cfg, Path(args.out) / experiment)
        print(f"{experiment}: wrote {out / 'results.csv'}")


if __name__ == "__main__":
    main()
