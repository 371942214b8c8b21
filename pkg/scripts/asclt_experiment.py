"""Run a log-averaged CLT experiment and write its artifacts.

Thin wrapper over the asclt subcommand: picks sane experiment defaults and
leaves everything overridable.  Writes CSV series, summary, and manifest
next to --out.
"""

import argparse

from reinwalk.cli import DEFAULT_SEED, ExperimentConfig, run


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--p", type=float, default=0.25)
    parser.add_argument("--mode", choices=("positive", "negative"), default="positive")
    parser.add_argument("--f", default="cosine", help="test function name")
    parser.add_argument("--n", type=int, default=100_000)
    parser.add_argument("--paths", type=int, default=200)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--out", default="asclt_run.csv")
    args = parser.parse_args()

    manifest = run(
        ExperimentConfig(
            command="asclt",
            mode=args.mode,
            p=args.p,
            f={"kind": args.f},
            n=args.n,
            paths=args.paths,
            seed=args.seed,
            out=args.out,
            format="csv",
        )
    )
    agg = manifest.aggregate
    print(
        f"mean T = {agg['mean']:.6f}  target = {agg['target']:.6f}  "
        f"abs error = {agg['abs_error']:.6f}  ({args.paths} paths, n = {args.n})"
    )


if __name__ == "__main__":
    main()
