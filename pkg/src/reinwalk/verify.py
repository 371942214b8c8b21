"""Acceptance suites: oracle identities and Monte Carlo checks of constants.

Each suite covers one numbered criterion of the acceptance checklist (see
the README) and returns CheckResult records; the cli streams them as lines
and the test suite asserts on them, so a run is judged the same way
everywhere.  Monte Carlo suites run at fixed master seeds: the seed is part
of the experiment definition, and results are reproducible verbatim.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .asclt import asclt_check, asclt_hat, cosine, exp_quadratic, gaussian_expectation
from .coeffs import build_coeff_table, lil_constant, loglog
from .exact import exact_distribution, martingale_transform, mean_recursion, var_recursion
from .reinforce import WalkConfig, batch_walk
from .rng import derive_substreams
from .steps import derived_moments, rademacher
from .strongapprox import integral_functional, make_tracker, simulate_bm, strassen_extremal


@dataclass
class CheckResult:
    """One acceptance check: measured value against its tolerance."""

    criterion: int
    label: str
    measured: float
    tolerance: float
    passed: bool


def format_result(r: CheckResult) -> str:
    status = "PASS" if r.passed else "FAIL"
    return (
        f"[criterion {r.criterion}] {r.label}: "
        f"measured={r.measured:.6g} tolerance={r.tolerance:.6g} {status}"
    )


def _at_most(criterion: int, label: str, measured: float, tol: float) -> CheckResult:
    return CheckResult(criterion, label, float(measured), tol, bool(measured <= tol))


def _at_least(criterion: int, label: str, measured: float, floor: float) -> CheckResult:
    return CheckResult(
        criterion, f"{label} (at least)", float(measured), floor, bool(measured >= floor)
    )


def _final_state(mode, p, dist, n, reps, master, track_com=False):
    """(S_n, G_n or None) over ``reps`` replicates, path-chunked.

    Chunk widths keep the realized-step buffer near 200 MB for Rademacher
    steps (one byte each) and 25M elements otherwise.
    """
    keys = derive_substreams(master, np.arange(reps))
    budget = 200_000_000 if dist.kind == "rademacher" else 25_000_000
    width = max(1, budget // n)
    wcfg = WalkConfig(mode=mode, p=p, dist=dist, track_com=track_com)
    s_parts, g_parts = [], []
    for lo in range(0, reps, width):
        batch = batch_walk(wcfg, keys[lo : lo + width], n)
        s_parts.append(batch.s_final)
        if track_com:
            g_parts.append(batch.com_final / n)
    s = np.concatenate(s_parts)
    return s, (np.concatenate(g_parts) if track_com else None)


def criterion_1() -> list:
    """Enumerated moments agree with the mean/variance recursions."""
    dist = rademacher()
    worst = 0.0
    for mode in ("positive", "negative"):
        for p in (0.0, 0.25, 0.5, 0.75):
            means = mean_recursion(8, p, mode, dist)
            variances = var_recursion(8, p, mode, dist)
            for n in range(1, 9):
                law = exact_distribution(n, p, mode, dist)
                worst = max(
                    worst,
                    abs(law.mean() - means[n]),
                    abs(law.variance() - variances[n]),
                )
    return [
        _at_most(1, "enumerated vs recursed moments, n <= 8, both modes", worst, 1e-10)
    ]


def criterion_2() -> list:
    """Empirical S_6 frequencies sit within 4 binomial errors of the law."""
    p, n, reps = 0.3, 6, 1_000_000
    law = exact_distribution(n, p, "positive", rademacher())
    s, _ = _final_state("positive", p, rademacher(), n, reps, master=20_206)
    values, counts = np.unique(s, return_counts=True)
    observed = dict(zip(values.tolist(), counts.tolist()))
    worst = 0.0
    for value, prob in law.sorted_atoms():
        se = math.sqrt(prob * (1.0 - prob) / reps)
        dev = abs(observed.get(value, 0) / reps - prob)
        worst = max(worst, dev / (4.0 * se))
    return [
        _at_most(2, "pmf deviation over 4 binomial errors, S_6 at p=0.3", worst, 1.0)
    ]


def criterion_3() -> list:
    """Variance grows like n/(1-2p): recursion constant and Monte Carlo."""
    dist = rademacher()
    results = []
    n_rec = 100_000
    for p in (0.1, 0.25, 0.4):
        var = var_recursion(n_rec, p, "positive", dist)
        ratio = float(var[-1]) * (1.0 - 2.0 * p) / n_rec
        results.append(
            _at_most(3, f"|Var (1-2p)/n - 1| at p={p}, n=1e5", abs(ratio - 1.0), 0.02)
        )
    n_mc, reps = 10_000, 100_000
    for p, master in ((0.1, 31_001), (0.25, 31_002), (0.4, 31_003)):
        target = float(var_recursion(n_mc, p, "positive", dist)[-1])
        s, _ = _final_state("positive", p, dist, n_mc, reps, master)
        mc = float(np.var(s, ddof=1))
        centered = s - np.mean(s)
        m4 = float(np.mean(centered**4))
        se = math.sqrt(max(m4 - mc * mc, 0.0) / reps)
        results.append(
            _at_most(
                3,
                f"|MC var - recursion| over 3 errors at p={p}, n=1e4",
                abs(mc - target) / (3.0 * se),
                1.0,
            )
        )
    return results


def criterion_4() -> list:
    """Center-of-mass variance constants, both reinforcement signs."""
    n, reps = 100_000, 20_000
    dist = rademacher()
    results = []
    for p, master in ((0.0, 40_000), (0.25, 40_025)):
        _, g = _final_state("positive", p, dist, n, reps, master, track_com=True)
        target = 2.0 / (3.0 * (2.0 - p) * (1.0 - 2.0 * p))
        ratio = float(np.var(g, ddof=1)) / n / target
        results.append(
            _at_most(4, f"com variance ratio deviation, positive p={p}", abs(ratio - 1.0), 0.05)
        )
    for p, master in ((0.25, 41_025), (0.5, 41_050)):
        _, g = _final_state("negative", p, dist, n, reps, master, track_com=True)
        sigma_check2 = derived_moments(dist, p)[4]
        target = 2.0 * sigma_check2 / (3.0 * (2.0 + p) * (1.0 + 2.0 * p))
        ratio = float(np.var(g, ddof=1)) / n / target
        results.append(
            _at_most(4, f"com variance ratio deviation, negative p={p}", abs(ratio - 1.0), 0.05)
        )
    return results


def criterion_5() -> list:
    """Critical-memory center of mass: variance over n log n near 4/9."""
    n, reps, p = 100_000, 20_000, 0.5
    _, g = _final_state("positive", p, rademacher(), n, reps, 50_050, track_com=True)
    ratio = float(np.var(g, ddof=1)) / (n * math.log(n)) / (4.0 / 9.0)
    return [
        _at_most(5, "com variance over (4/9) n log n at p=1/2", abs(ratio - 1.0), 0.12)
    ]


def _asclt_finals(mode, p, dist, f, n, reps, master) -> np.ndarray:
    keys = derive_substreams(master, np.arange(reps))
    width = max(1, 20_000_000 // n)
    wcfg = WalkConfig(mode=mode, p=p, dist=dist, track_com=False)
    series = asclt_check if mode == "negative" else asclt_hat
    finals = []
    for lo in range(0, reps, width):
        batch = batch_walk(wcfg, keys[lo : lo + width], n, record_s=True)
        _, t = series(batch.s_history, p, dist, f, checkpoints=[n])
        finals.append(t[0])
    return np.concatenate(finals)


def criterion_6() -> list:
    """Log-averaged functionals hit their Gaussian targets."""
    n, reps = 100_000, 200
    dist = rademacher()
    cases = [
        ("cosine, p=0.25", "positive", 0.25, cosine(), 606, 0.05),
        ("cosine, p=0.5", "negative", 0.5, cosine(), 607, 0.05),
        ("exp_quadratic(1/4), p=0.25", "positive", 0.25, exp_quadratic(0.25), 606, 0.2),
    ]
    results = []
    fractions = []
    for label, mode, p, f, master, tol in cases:
        finals = _asclt_finals(mode, p, dist, f, n, reps, master)
        target = gaussian_expectation(f)
        results.append(
            _at_most(6, f"|mean T - target|, {label}", abs(float(np.mean(finals)) - target), tol)
        )
        fractions.append(
            (label, float(np.mean(np.abs(finals - target) <= 0.25)))
        )
    for label, frac in fractions:
        results.append(
            _at_least(6, f"fraction of paths with |T - target| <= 0.25, {label}", frac, 0.9)
        )
    return results


def criterion_7() -> list:
    """Variance of the raw average functional of BM matches its constant."""
    reps, grid_n = 10_000, 100_000
    pairs = ((0.0, 1.0), (0.25, 0.5), (0.5, 0.75))
    grid = np.arange(1, grid_n + 1, dtype=np.float64) / grid_n
    keys = derive_substreams(70_007, np.arange(reps))
    # b_n = 1 end point: the module statistic is the raw integral over
    # sqrt(2 loglog 1) with the guard clamp, so multiply the scale back.
    scale = math.sqrt(2.0 * loglog(1.0))
    samples = np.empty((len(pairs), reps))
    for j in range(reps):
        path = simulate_bm(grid, int(keys[j]))
        for i, (rho1, rho2) in enumerate(pairs):
            samples[i, j] = integral_functional(path, rho1, rho2, 1.0) * scale
    results = []
    for i, (rho1, rho2) in enumerate(pairs):
        target = 2.0 / ((1.0 + rho1 + rho2) * (2.0 + 2.0 * rho1 + rho2))
        ratio = float(np.var(samples[i], ddof=1)) / target
        results.append(
            _at_most(
                7,
                f"integral variance ratio deviation, rho=({rho1}, {rho2})",
                abs(ratio - 1.0),
                0.03,
            )
        )
    return results


def _ball_values(cell_edges, derivatives, rho1, rho2) -> np.ndarray:
    """Exact integral t^rho1 g(t^rho2) for piecewise-constant g' rows."""
    beta = (1.0 + rho1) / rho2
    prim = (cell_edges - cell_edges ** (beta + 1.0) / (beta + 1.0)) / (1.0 + rho1)
    return derivatives @ np.diff(prim)


def criterion_8() -> list:
    """Extremal value: analytic identity and optimality over the unit ball."""
    pairs = ((0.0, 1.0), (0.25, 0.5), (0.5, 0.75), (2.0, 1.0))
    worst = 0.0
    for rho1, rho2 in pairs:
        _, value = strassen_extremal(rho1, rho2)
        worst = max(worst, abs(value - lil_constant(rho1, rho2)))
    results = [
        _at_most(8, "extremal quadrature vs analytic constant", worst, 1e-8)
    ]
    rng = np.random.default_rng(88)
    edges = np.linspace(0.0, 1.0, 65)
    worst_excess = -math.inf
    for rho1, rho2 in ((0.25, 0.5), (0.0, 1.0)):
        _, value = strassen_extremal(rho1, rho2)
        c = rng.standard_normal((1000, 64))
        energy = np.mean(c * c, axis=1)
        radius = rng.uniform(0.0, 1.0, size=1000)
        c *= np.sqrt(radius / energy)[:, None]
        vals = np.abs(_ball_values(edges, c, rho1, rho2))
        worst_excess = max(worst_excess, float(vals.max() - value))
    results.append(
        _at_most(8, "best of 1000 random unit-ball candidates minus extremal", worst_excess, 1e-9)
    )
    return results


def criterion_9() -> list:
    """Running-max band coverage at n = 1e6 (sanity band, not a limit)."""
    from .cli import _lil_slice

    n, reps = 1_000_000, 200
    results = []
    for kind, p, master in (("walk_hat", 0.25, 9091), ("com_hat_sub", 0.0, 9090)):
        keys = derive_substreams(master, np.arange(reps))
        maxima, _ = _lil_slice(
            {
                "kind": kind,
                "p": p,
                "dist": {"kind": "rademacher"},
                "truncation": None,
                "n": n,
                "cps": [n],
                "keys": keys.tolist(),
                "trace": False,
            }
        )
        constant = make_tracker(kind, p, rademacher()).constant
        ratios = maxima / constant
        frac = float(np.mean((ratios >= 0.4) & (ratios <= 1.3)))
        results.append(
            _at_least(9, f"fraction of running maxima in [0.4, 1.3], {kind} p={p}", frac, 0.9)
        )
    return results


def criterion_10() -> list:
    """Martingale decomposition: telescoping and conditional-variance clock."""
    n, reps, p = 100_000, 100, 0.25
    dist = rademacher()
    keys = derive_substreams(10_010, np.arange(reps))
    wcfg = WalkConfig(mode="positive", p=p, dist=dist, track_com=False)
    batch = batch_walk(wcfg, keys, n, record_realized=True)
    table = build_coeff_table("positive", p, n)
    worst = 0.0
    in_window = 0
    for j in range(reps):
        mp = martingale_transform(batch.realized[:, j], p, "positive", table, dist)
        worst = max(worst, abs(float(mp.martingale[n] - np.sum(mp.increments[1:]))))
        if 0.9 <= mp.normalized_cumvar[n] <= 1.1:
            in_window += 1
    return [
        _at_most(10, "worst telescoping residual over 100 paths", worst, 1e-9),
        _at_least(
            10, "fraction with normalized cumulative variance in [0.9, 1.1]", in_window / reps, 0.95
        ),
    ]


def criterion_11() -> list:
    """Artifacts are byte-identical across worker counts at fixed seed."""
    from . import cli

    cases = [
        ("simulate", dict(n=2000)),
        ("asclt", dict(n=3000, paths=10, p=0.25)),
        ("lil", dict(n=5000, paths=8, p=0.25, kind="walk_hat")),
        ("bm", dict(n=4000, paths=6)),
    ]
    results = []
    with tempfile.TemporaryDirectory() as tmp:
        for name, kwargs in cases:
            blobs = []
            out = os.path.join(tmp, f"{name}.csv")
            for threads in ("1", "2"):
                previous = os.environ.get("REINFORCE_THREADS")
                os.environ["REINFORCE_THREADS"] = threads
                try:
                    cli.run(cli.ExperimentConfig(command=name, out=out, format="csv", **kwargs))
                finally:
                    if previous is None:
                        del os.environ["REINFORCE_THREADS"]
                    else:
                        os.environ["REINFORCE_THREADS"] = previous
                with open(out, "rb") as fh:
                    blob = fh.read()
                with open(out + ".summary.json", "rb") as fh:
                    blob += fh.read()
                with open(out + ".manifest.json") as fh:
                    manifest = json.load(fh)
                manifest.pop("wall_time_s")
                blobs.append((blob, manifest))
            same = blobs[0] == blobs[1]
            results.append(
                _at_least(11, f"byte-identical across 1 vs 2 workers, {name}", float(same), 1.0)
            )
    return results


SUITES = {
    "oracle": criterion_1,
    "oracle-mc": criterion_2,
    "variance-growth": criterion_3,
    "com-variance": criterion_4,
    "critical-variance": criterion_5,
    "asclt": criterion_6,
    "bm-variance": criterion_7,
    "strassen": criterion_8,
    "lil-bands": criterion_9,
    "martingale": criterion_10,
    "reproducibility": criterion_11,
}


# Wall-time budgets (seconds) for the criteria that state one.
_BUDGET_SECONDS = {
    "oracle": 30.0,
    "oracle-mc": 60.0,
    "variance-growth": 300.0,
    "com-variance": 600.0,
    "asclt": 900.0,
    "bm-variance": 300.0,
}


def run_suite(name: str) -> list:
    """All CheckResults for one named suite, wall-time check included."""
    if name not in SUITES:
        raise ValueError(f"suite must be one of {tuple(SUITES)}, got {name!r}")
    start = time.perf_counter()
    results = SUITES[name]()
    elapsed = time.perf_counter() - start
    budget = _BUDGET_SECONDS.get(name)
    if budget is not None:
        results.append(
            _at_most(results[0].criterion, "suite wall time (s)", elapsed, budget)
        )
    return results
