"""Log-weighted averages that see the Gaussian law along single paths.

The almost-sure central limit theorem replaces the ensemble average of the
usual CLT by a logarithmic average along one trajectory: with x_k the
de-drifted, variance-normalized partial sum at time k,

    T_n(f) = (1/log n) * sum_{k<=n} (1/k) f(x_k)  ->  E f(Z)   a.s.

for a standard normal Z.  Three walk regimes are covered, each with its own
scaling and weights (``asclt_hat`` for the positively reinforced walk below
and at the critical memory 1/2, ``asclt_check`` for the negatively
reinforced walk), plus the same functional along a Brownian path sampled on
a clock grid (``asclt_bm``) and a generic streaming accumulator over an
arbitrary clock (``asclt_update``/``finalize``).

Convergence is at log rate, so nothing here is fast: tests and experiments
aggregate over paths, and T_n is emitted on a geometric checkpoint grid to
show the drift toward the target without drowning in output.

Gaussian reference expectations for the supported test functions are all
closed forms; a 64-node Gauss-Hermite rule is kept as the fallback for any
kind added without one.  The rule is accurate (well under 1e-8 relative) for
smooth bounded integrands; it is not suitable for kinked or
Gaussian-divergent ones, which must bring a closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .coeffs import NormalizationSchedule
from .steps import StepDistribution, derived_moments

FUNCTION_KINDS = (
    "cosine",
    "arctan",
    "square",
    "constant",
    "exp_quadratic",
    "smoothed_indicator",
)

# Rows per evaluation block in the vectorized functionals, shared with the
# slab sizing of the batch engine.
_BLOCK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class TestFunction:
    """One test function for the log-averaged CLT.

    Parameters are read per kind: ``c`` by constant, ``gamma`` by
    exp_quadratic (gamma < 1/2 keeps e^{gamma x^2} Gaussian-integrable),
    ``a``/``b``/``width`` by smoothed_indicator (the indicator of [a, b]
    continued by linear ramps of the given width on both sides).  Build
    instances through the factory functions, which validate.
    """

    kind: str
    c: float = 0.0
    gamma: float = 0.0
    a: float = 0.0
    b: float = 0.0
    width: float = 0.0

    __test__ = False  # not a pytest case despite the name


def cosine() -> TestFunction:
    return TestFunction(kind="cosine")


def arctan() -> TestFunction:
    return TestFunction(kind="arctan")


def square() -> TestFunction:
    return TestFunction(kind="square")


def constant(c: float) -> TestFunction:
    return TestFunction(kind="constant", c=float(c))


def exp_quadratic(gamma: float) -> TestFunction:
    if not gamma < 0.5:
        raise ValueError(f"gamma must be < 1/2, got {gamma}")
    return TestFunction(kind="exp_quadratic", gamma=float(gamma))


def smoothed_indicator(a: float, b: float, width: float) -> TestFunction:
    if not width > 0.0:
        raise ValueError(f"ramp width must be positive, got {width}")
    if a > b:
        raise ValueError(f"need a <= b, got a={a}, b={b}")
    return TestFunction(kind="smoothed_indicator", a=float(a), b=float(b), width=float(width))


def function_spec(f: TestFunction) -> dict:
    """JSON-friendly description, inverse of :func:`function_from_spec`."""
    if f.kind == "constant":
        return {"kind": "constant", "c": f.c}
    if f.kind == "exp_quadratic":
        return {"kind": "exp_quadratic", "gamma": f.gamma}
    if f.kind == "smoothed_indicator":
        return {"kind": "smoothed_indicator", "a": f.a, "b": f.b, "width": f.width}
    if f.kind in FUNCTION_KINDS:
        return {"kind": f.kind}
    raise ValueError(f"unknown test function kind {f.kind!r}")


def function_from_spec(obj: dict) -> TestFunction:
    kind = obj.get("kind")
    if kind == "cosine":
        return cosine()
    if kind == "arctan":
        return arctan()
    if kind == "square":
        return square()
    if kind == "constant":
        return constant(obj["c"])
    if kind == "exp_quadratic":
        return exp_quadratic(obj["gamma"])
    if kind == "smoothed_indicator":
        return smoothed_indicator(obj["a"], obj["b"], obj["width"])
    raise ValueError(f"unknown test function kind {kind!r}")


def evaluate(f: TestFunction, x):
    """f(x) for scalars or arrays of any shape."""
    x = np.asarray(x, dtype=np.float64)
    if f.kind == "cosine":
        out = np.cos(x)
    elif f.kind == "arctan":
        out = np.arctan(x)
    elif f.kind == "square":
        out = x * x
    elif f.kind == "constant":
        out = np.full_like(x, f.c)
    elif f.kind == "exp_quadratic":
        out = np.exp(f.gamma * x * x)
    elif f.kind == "smoothed_indicator":
        up = (x - (f.a - f.width)) / f.width
        down = ((f.b + f.width) - x) / f.width
        out = np.clip(np.minimum(up, down), 0.0, 1.0)
    else:
        raise ValueError(f"unknown test function kind {f.kind!r}")
    return out if out.ndim else float(out)


def _phi(t: float) -> float:
    return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)


def gaussian_expectation(f: TestFunction) -> float:
    """E f(Z) for standard normal Z, in closed form for every kind.

    The smoothed indicator integrates piecewise: the plateau gives
    Phi(b) - Phi(a) and each linear ramp reduces to Phi and phi terms via
    int x phi(x) dx = phi(lo) - phi(hi).
    """
    if f.kind == "constant":
        return f.c
    if f.kind == "square":
        return 1.0
    if f.kind == "cosine":
        return math.exp(-0.5)
    if f.kind == "arctan":
        return 0.0
    if f.kind == "exp_quadratic":
        if not f.gamma < 0.5:
            raise ValueError(f"gamma must be < 1/2, got {f.gamma}")
        return 1.0 / math.sqrt(1.0 - 2.0 * f.gamma)
    if f.kind == "smoothed_indicator":
        lo, hi = f.a - f.width, f.b + f.width
        plateau = ndtr(f.b) - ndtr(f.a)
        ramp_up = (_phi(lo) - _phi(f.a) - lo * (ndtr(f.a) - ndtr(lo))) / f.width
        ramp_down = (hi * (ndtr(hi) - ndtr(f.b)) - (_phi(f.b) - _phi(hi))) / f.width
        return float(plateau + ramp_up + ramp_down)
    raise ValueError(f"unknown test function kind {f.kind!r}")


def gauss_hermite_expectation(f: TestFunction, nodes: int = 64) -> float:
    """E f(Z) by Gauss-Hermite quadrature; fallback for kinds without a
    closed form.  Reliable only for smooth integrands of moderate growth."""
    t, w = np.polynomial.hermite.hermgauss(nodes)
    vals = evaluate(f, math.sqrt(2.0) * t)
    return float(w @ vals / math.sqrt(math.pi))


def checkpoint_grid(n: int, ratio: float = 1.5) -> np.ndarray:
    """Geometric emission grid ceil(ratio^j) up to n, always ending at n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if ratio <= 1.0:
        raise ValueError(f"ratio must be > 1, got {ratio}")
    ks = []
    j = 0
    while True:
        k = math.ceil(ratio**j)
        if k > n:
            break
        ks.append(k)
        j += 1
    ks.append(n)
    return np.unique(np.asarray(ks, dtype=np.int64))


def schedule_k0(schedule: NormalizationSchedule) -> int:
    """Smallest k with b_k >= e, the first index whose log-clock is
    positive.  Terms before it are dropped by the clock-weighted forms."""
    hi = 1
    while schedule.b_n(hi) < math.e:
        hi *= 2
        if hi > 1 << 40:
            raise ValueError("schedule clock stays below e out to 2^40")
    lo = max(1, hi // 2)
    while lo < hi:
        mid = (lo + hi) // 2
        if schedule.b_n(mid) < math.e:
            lo = mid + 1
        else:
            hi = mid
    return lo


@dataclass
class AscltAccumulator:
    """Streaming clock-weighted average over one path.

    Feed consecutive indices through :func:`asclt_update`; each index
    k >= k0 adds ((b_k - b_{k-1})/b_k) f(m_k / sqrt(b_k)), compensated
    summation against the 1e6-term drip.  ``finalize`` divides by log b_n.
    One accumulator per path per test function.
    """

    schedule: NormalizationSchedule
    f: TestFunction
    k0: int
    n: int = 0
    weighted_sum: float = 0.0
    compensation: float = 0.0


def make_accumulator(schedule: NormalizationSchedule, f: TestFunction) -> AscltAccumulator:
    return AscltAccumulator(schedule=schedule, f=f, k0=schedule_k0(schedule))


def asclt_update(acc: AscltAccumulator, k: int, m_k: float) -> AscltAccumulator:
    """Absorb the path value m_k at index k; indices must arrive as
    1, 2, 3, ... with no gaps."""
    if k != acc.n + 1:
        raise ValueError(f"expected index {acc.n + 1}, got {k}")
    if k >= acc.k0:
        b_k = acc.schedule.b_n(k)
        b_prev = acc.schedule.b_n(k - 1) if k > 1 else 0.0
        if b_k <= b_prev:
            raise ValueError(f"schedule clock not increasing at k={k}")
        term = ((b_k - b_prev) / b_k) * evaluate(acc.f, m_k / math.sqrt(b_k))
        y = term - acc.compensation
        t = acc.weighted_sum + y
        acc.compensation = (t - acc.weighted_sum) - y
        acc.weighted_sum = t
    acc.n = k
    return acc


def finalize(acc: AscltAccumulator) -> float:
    if acc.n < acc.k0:
        raise ValueError(f"nothing accumulated: n={acc.n} < k0={acc.k0}")
    return acc.weighted_sum / math.log(acc.schedule.b_n(acc.n))


def _kahan_add(total: np.ndarray, comp: np.ndarray, seg: np.ndarray) -> None:
    y = seg - comp
    t = total + y
    comp[:] = (t - total) - y
    total[:] = t


def _as_history(s_history) -> tuple[np.ndarray, bool]:
    s = np.asarray(s_history, dtype=np.float64)
    if s.ndim == 1:
        return s.reshape(-1, 1), True
    if s.ndim == 2:
        return s, False
    raise ValueError(f"path history must be 1- or 2-dimensional, got shape {s.shape}")


def _checkpoints(checkpoints, n: int) -> np.ndarray:
    if n < 2:
        raise ValueError(f"need at least 2 steps of history, got {n}")
    if checkpoints is None:
        cps = checkpoint_grid(n)
        return cps[cps >= 2]
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.ndim != 1 or cps.size == 0:
        raise ValueError("checkpoints must be a nonempty 1-d sequence")
    if np.any(np.diff(cps) <= 0):
        raise ValueError("checkpoints must be strictly increasing")
    if cps[0] < 2 or cps[-1] > n:
        raise ValueError(f"checkpoints must lie in [2, {n}]")
    return cps


def _log_average_series(
    s: np.ndarray,
    schedule: NormalizationSchedule,
    center: np.ndarray,
    inv_scale: np.ndarray,
    f: TestFunction,
    cps: np.ndarray,
    k_start: int,
) -> np.ndarray:
    n, r = s.shape
    w = schedule.weight(np.arange(1, n + 1, dtype=np.float64))
    total = np.zeros(r)
    comp = np.zeros(r)
    out = np.empty((cps.size, r))
    max_rows = max(1, _BLOCK_ELEMENTS // r)
    row = k_start - 1
    for i, cp in enumerate(cps):
        cp = int(cp)
        while row < cp:
            hi = min(cp, row + max_rows)
            x = (s[row:hi] - center[row:hi, None]) * inv_scale[row:hi, None]
            _kahan_add(total, comp, (w[row:hi, None] * evaluate(f, x)).sum(axis=0))
            row = hi
        out[i] = total / schedule.log_normalizer(cp)
    return out


def asclt_hat(
    s_history,
    p: float,
    dist: StepDistribution,
    f: TestFunction,
    checkpoints=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Log-averaged CLT functional along positively reinforced partial sums.

    ``s_history`` holds S_k for k = 1..n down axis 0, one path per column
    (a single path may come as a 1-d array).  Below the critical memory the
    average is (1/log n) sum (1/k) f(sqrt(1-2p) (S_k - k m1) / (sigma sqrt(k)));
    at p = 1/2 the scaling becomes sigma sqrt(k log k) with weights
    1/(k log k) and a loglog normalizer.  Beyond 1/2 the de-biased sums are
    no longer diffusive and there is no such average.

    Summation starts at the schedule's k0 (first index whose clock reaches
    e): the limit ignores any fixed prefix, and the small-k terms carry the
    largest weights exactly where the normal approximation is worst, so
    keeping them plants a finite-n bias of several percent.

    Returns (checkpoints, series) with one row of T values per checkpoint;
    the series is squeezed to 1-d for 1-d input.
    """
    s, one_d = _as_history(s_history)
    n = s.shape[0]
    if p > 0.5:
        raise ValueError(f"no log-averaged CLT at memory p > 1/2, got p={p}")
    m1, _, sigma2, _, _ = derived_moments(dist, p)
    if sigma2 <= 0.0:
        raise ValueError("step distribution is degenerate (sigma2 = 0)")
    sigma = math.sqrt(sigma2)
    ks = np.arange(1, n + 1, dtype=np.float64)
    center = m1 * ks
    if p == 0.5:
        schedule = NormalizationSchedule(kind="hat_critical", p=p, sigma2=sigma2)
        safe = np.maximum(ks, 2.0)
        inv_scale = 1.0 / (sigma * np.sqrt(safe * np.log(safe)))
        inv_scale[0] = np.nan  # k = 1 carries no weight in the critical sum
    else:
        schedule = NormalizationSchedule(kind="hat_subcritical", p=p, sigma2=sigma2)
        inv_scale = math.sqrt(1.0 - 2.0 * p) / (sigma * np.sqrt(ks))
    k_start = max(schedule_k0(schedule), 2 if p == 0.5 else 1)
    cps = _checkpoints(checkpoints, n)
    out = _log_average_series(s, schedule, center, inv_scale, f, cps, k_start)
    return cps, (out[:, 0] if one_d else out)


def asclt_check(
    s_history,
    p: float,
    dist: StepDistribution,
    f: TestFunction,
    checkpoints=None,
) -> tuple[np.ndarray, np.ndarray]:
    """As :func:`asclt_hat` for the negatively reinforced walk: scaling
    sqrt(1+2p) (S_k - k mu) / (sigma_check sqrt(k)) with the long-run mean
    mu = (1-p) m1 / (1+p), valid for every p in [0, 1).  Summation starts
    at the check schedule's k0."""
    s, one_d = _as_history(s_history)
    n = s.shape[0]
    _, _, _, mu_check, sigma_check2 = derived_moments(dist, p)
    if sigma_check2 <= 0.0:
        raise ValueError("step distribution is degenerate (sigma_check2 = 0)")
    schedule = NormalizationSchedule(kind="check", p=p, sigma2=sigma_check2)
    ks = np.arange(1, n + 1, dtype=np.float64)
    center = mu_check * ks
    inv_scale = math.sqrt(1.0 + 2.0 * p) / (math.sqrt(sigma_check2) * np.sqrt(ks))
    cps = _checkpoints(checkpoints, n)
    out = _log_average_series(s, schedule, center, inv_scale, f, cps, schedule_k0(schedule))
    return cps, (out[:, 0] if one_d else out)


def asclt_bm(times, values, f: TestFunction, schedule: NormalizationSchedule | None = None):
    """Log-averaged CLT functional of a Brownian path sampled on a clock grid.

    Discretizes (1/log b_n) int f(W(t)/sqrt(t)) dt/t with the midpoint rule
    per grid cell: cell [b_{k-1}, b_k] contributes (b_k - b_{k-1})/t_mid
    times f evaluated at the interpolated midpoint (W_{k-1}+W_k)/2 over
    sqrt(t_mid).  Integration runs from b_1 (the limit holds from any
    positive origin, and 1/t is not integrable at 0, so there is no
    [0, b_1] cell).  ``values`` holds W(b_k) down axis 0, one path per
    column (1-d for a single path).

    If ``schedule`` is given, the grid must equal its clock at 1..K; a
    subsampled or shifted grid is rejected rather than silently reweighted.
    """
    b = np.asarray(times, dtype=np.float64)
    if b.ndim != 1 or b.size < 2:
        raise ValueError("clock grid must be a 1-d sequence with at least 2 points")
    if b[0] <= 0.0 or np.any(np.diff(b) <= 0.0):
        raise ValueError("clock grid must be positive and strictly increasing")
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] != b.size:
        raise ValueError(f"values rows ({v.shape[0]}) must match grid size ({b.size})")
    if schedule is not None:
        expected = schedule.b_n(np.arange(1, b.size + 1))
        if not np.allclose(b, expected, rtol=1e-9, atol=1e-12):
            raise ValueError("grid does not match the schedule clock (coarse or offset)")
    if b[-1] < math.e:
        raise ValueError("clock grid ends before reaching e; log normalizer undefined")
    one_d = v.ndim == 1
    vv = v.reshape(b.size, -1)
    r = vv.shape[1]
    t_mid = 0.5 * (b[1:] + b[:-1])
    wts = np.diff(b) / t_mid
    total = np.zeros(r)
    comp = np.zeros(r)
    max_rows = max(1, _BLOCK_ELEMENTS // r)
    lo = 0
    n_cells = b.size - 1
    while lo < n_cells:
        hi = min(n_cells, lo + max_rows)
        w_mid = 0.5 * (vv[lo + 1 : hi + 1] + vv[lo:hi])
        x = w_mid / np.sqrt(t_mid[lo:hi, None])
        _kahan_add(total, comp, (wts[lo:hi, None] * evaluate(f, x)).sum(axis=0))
        lo = hi
    t = total / math.log(b[-1])
    return float(t[0]) if one_d else t
