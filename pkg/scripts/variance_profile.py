"""Print how Var(S_n)/n approaches its limit across memory parameters.

For each p in a sweep the exact variance recursion is evaluated on a
geometric n-grid and compared with the limiting constant 1/(1-2p) (positive
reinforcement, Rademacher steps), showing the n^(2p-1) convergence tail
that dominates near the critical point.
"""

import argparse

import numpy as np

from reinwalk.exact import var_recursion
from reinwalk.steps import rademacher


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=100_000, help="largest horizon")
    parser.add_argument(
        "--p", type=float, nargs="+", default=[0.1, 0.25, 0.4, 0.45], help="memory sweep"
    )
    args = parser.parse_args()

    ns = np.unique(np.geomspace(10, args.n, 12).astype(np.int64))
    print("p," + ",".join(f"n={n}" for n in ns))
    for p in args.p:
        var = var_recursion(args.n, p, "positive", rademacher())
        ratios = var[ns] * (1.0 - 2.0 * p) / ns
        print(f"{p}," + ",".join(f"{r:.6f}" for r in ratios))


if __name__ == "__main__":
    main()
