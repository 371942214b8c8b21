"""Running-max band experiment for walk or Brownian iterated-logarithm stats.

Runs the lil (or bm) subcommand and prints the band summary: how many path
running maxima, divided by the almost-sure constant, land in the sanity
band, plus the median ratio (the sharp check: the median sits near 1 when
the constant and normalization are right, even while early-path overshoots
push the maxima above the band's top edge).
"""

import argparse
import json

from reinwalk.cli import DEFAULT_SEED, ExperimentConfig, run
from reinwalk.strongapprox import TRACKER_KINDS


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--brownian", action="store_true", help="track Brownian motion instead")
    parser.add_argument("--kind", choices=TRACKER_KINDS, default="walk_hat")
    parser.add_argument("--p", type=float, default=0.25)
    parser.add_argument("--n", type=int, default=100_000)
    parser.add_argument("--paths", type=int, default=50)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--out", default="band_run.csv")
    args = parser.parse_args()

    config = (
        ExperimentConfig(command="bm", n=args.n, paths=args.paths, seed=args.seed)
        if args.brownian
        else ExperimentConfig(
            command="lil", kind=args.kind, p=args.p, n=args.n, paths=args.paths, seed=args.seed
        )
    )
    config.out = args.out
    config.format = "csv"
    manifest = run(config)
    print(json.dumps(manifest.aggregate, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
