"""Brownian grid paths and iterated-logarithm diagnostics.

The walks in this package ride Brownian clocks after strong approximation,
so their almost-sure envelopes can be studied on an actual Brownian motion:
this module simulates W on a time grid, measures how much W(t)/sqrt(t)
moves between consecutive clock points, evaluates the scaled occupation
functional I_n = int_0^1 t^rho1 W(b_n t^rho2) dt / sqrt(2 b_n loglog b_n),
and exposes the extremal element of Strassen's ball that attains its
limsup.  LilTracker turns simulated walk or center-of-mass values into
running iterated-logarithm statistics with the matching constants.

Every limsup here is a statement about infinitely large n; finite-n checks
can only band the running maximum, and the loglog scale makes those bands
wide.  Tests treat them as sanity envelopes, not estimates of the limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .coeffs import com_lil_constant, loglog
from .rng import unit_uniform_array
from .steps import StepDistribution, derived_moments, gaussian, quantile

__all__ = [
    "BMPath",
    "LilTracker",
    "TRACKER_KINDS",
    "bridge_sup_check",
    "eta",
    "integral_functional",
    "lil_running_max",
    "lil_stats",
    "lil_update",
    "make_tracker",
    "simulate_bm",
    "strassen_extremal",
]

TRACKER_KINDS = ("walk_hat", "walk_check", "com_hat_sub", "com_hat_crit", "com_check")

_STD_NORMAL = gaussian(0.0, 1.0)
_BLOCK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class BMPath:
    """Brownian motion sampled on a grid, anchored at W(0) = 0.

    ``times`` starts at 0 and increases strictly; ``values`` holds W at
    those times.  Between grid points the path is read by linear
    interpolation, which is exact at the nodes and accurate enough for
    the sup and integral statistics built on top (their tolerances are
    far looser than the interpolation error on any reasonable grid).
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be matching 1-d arrays")
        if t.size < 1 or t[0] != 0.0 or v[0] != 0.0:
            raise ValueError("path must start at W(0) = 0")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("times must increase strictly")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


def simulate_bm(grid, seed: int) -> BMPath:
    """Sample W on the given positive time grid, deterministically per seed.

    Increments over consecutive grid intervals are independent centered
    Gaussians with variance equal to the interval length, drawn from the
    package's counter-based stream for ``seed``.  The origin is prepended,
    so the returned path has one more point than the grid.
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 1 or g.size < 1:
        raise ValueError("grid must be a nonempty 1-d sequence")
    if g[0] <= 0.0 or np.any(np.diff(g) <= 0.0):
        raise ValueError("grid must be positive and strictly increasing")
    u = unit_uniform_array(np.uint64(seed), np.arange(g.size, dtype=np.uint64))
    z = quantile(_STD_NORMAL, u)
    dt = np.diff(g, prepend=0.0)
    w = np.cumsum(z * np.sqrt(dt))
    return BMPath(
        times=np.concatenate(([0.0], g)), values=np.concatenate(([0.0], w))
    )


def bridge_sup_check(path: BMPath, schedule, refinement: int) -> np.ndarray:
    """Sup of |W(t)/sqrt(t) − W(b_i)/sqrt(b_i)| over each clock interval.

    For every consecutive pair b_i <= b_{i+1} of ``schedule`` the scaled
    path is read at ``refinement`` + 1 evenly spaced points of the
    interval and the largest deviation from the left-endpoint value is
    returned.  When consecutive clock points coincide the interval
    contributes 0.  Clocks growing slowly enough drive these sups to
    zero; a geometric clock keeps them of unit order.
    """
    if int(refinement) != refinement or refinement < 2:
        raise ValueError(f"refinement must be an integer >= 2, got {refinement}")
    r = int(refinement)
    b = np.asarray(schedule, dtype=np.float64)
    if b.ndim != 1 or b.size < 2:
        raise ValueError("schedule needs at least two clock points")
    if b[0] <= 0.0 or np.any(np.diff(b) < 0.0):
        raise ValueError("schedule must be positive and nondecreasing")
    if b[-1] > path.times[-1]:
        raise ValueError("schedule runs beyond the simulated horizon")
    fracs = np.linspace(0.0, 1.0, r + 1)
    widths = np.diff(b)
    anchor = np.interp(b[:-1], path.times, path.values) / np.sqrt(b[:-1])
    out = np.empty(b.size - 1)
    max_rows = max(1, _BLOCK_ELEMENTS // (r + 1))
    lo = 0
    while lo < out.size:
        hi = min(out.size, lo + max_rows)
        t = b[lo:hi, None] + widths[lo:hi, None] * fracs[None, :]
        scaled = np.interp(t, path.times, path.values) / np.sqrt(t)
        np.abs(scaled - anchor[lo:hi, None], out=scaled)
        out[lo:hi] = scaled.max(axis=1)
        lo = hi
    return out


def eta(path: BMPath, t, s):
    """W(t s) / sqrt(2 t loglog t), the rescaled path at relative time s.

    ``t`` and ``s`` may be scalars or arrays (broadcast together); the
    product t*s must stay within the simulated horizon.  The double
    logarithm is the guarded one, so small t never flips the sign of the
    denominator.
    """
    tt = np.asarray(t, dtype=np.float64)
    ss = np.asarray(s, dtype=np.float64)
    if np.any(tt <= 0.0):
        raise ValueError("t must be positive")
    x = tt * ss
    if np.any(x < 0.0) or np.any(x > path.times[-1]):
        raise ValueError("t*s falls outside the simulated horizon")
    w = np.interp(x, path.times, path.values)
    out = w / np.sqrt(2.0 * tt * loglog(tt))
    if np.isscalar(t) and np.isscalar(s):
        return float(out)
    return out


def integral_functional(
    path: BMPath, rho1: float, rho2: float, b_n: float, nodes: int = 4096
) -> float:
    """I_n = int_0^1 t^rho1 W(b_n t^rho2) dt / sqrt(2 b_n loglog b_n).

    Composite midpoint quadrature; when rho1 < 0 the integral is computed
    in the substituted variable u = t^rho2, which turns the singular
    factor into u^{(1+rho1)/rho2 - 1} and lets the vanishing of W at 0
    tame the endpoint.  The integrand is only Hoelder continuous in W, so
    midpoint already saturates the achievable accuracy.  rho2 = 0 freezes
    the path factor at W(b_n) and the integral collapses to
    W(b_n)/(1+rho1), evaluated exactly.
    """
    if rho1 <= -1.0:
        raise ValueError(f"rho1 must be > -1, got {rho1}")
    if rho2 < 0.0:
        raise ValueError(f"rho2 must be >= 0, got {rho2}")
    if nodes < 256:
        raise ValueError(f"at least 256 quadrature nodes required, got {nodes}")
    if not 0.0 < b_n <= path.times[-1]:
        raise ValueError("b_n must lie within the simulated horizon")
    scale = math.sqrt(2.0 * b_n * float(loglog(b_n)))
    if rho2 == 0.0:
        w_end = float(np.interp(b_n, path.times, path.values))
        return w_end / (1.0 + rho1) / scale
    mid = (np.arange(nodes, dtype=np.float64) + 0.5) / nodes
    if rho1 < 0.0:
        beta = (1.0 + rho1) / rho2
        g = mid ** (beta - 1.0) * np.interp(b_n * mid, path.times, path.values)
        raw = g.mean() / rho2
    else:
        raw = float(
            np.mean(mid**rho1 * np.interp(b_n * mid**rho2, path.times, path.values))
        )
    return raw / scale


@dataclass(frozen=True)
class StrassenExtremal:
    """The Strassen-ball element maximizing the averaged path functional.

    ``beta`` is (1+rho1)/rho2 and ``norm`` makes the derivative
    unit-energy: f'(u) = (1 - u^beta)/norm, f(0) = 0.  Instances are
    callable; ``derivative`` exposes f' for energy checks.
    """

    beta: float
    norm: float

    def __call__(self, u):
        uu = np.asarray(u, dtype=np.float64)
        out = (uu - uu ** (self.beta + 1.0) / (self.beta + 1.0)) / self.norm
        return float(out) if np.isscalar(u) else out

    def derivative(self, u):
        uu = np.asarray(u, dtype=np.float64)
        out = (1.0 - uu**self.beta) / self.norm
        return float(out) if np.isscalar(u) else out


def strassen_extremal(rho1: float, rho2: float) -> tuple[StrassenExtremal, float]:
    """Extremal function of the averaged functional and its attained value.

    Over the ball of absolutely continuous f with f(0) = 0 and unit
    derivative energy, int_0^1 t^rho1 f(t^rho2) dt is maximized by the
    Cauchy-Schwarz equality case; the attained value is computed here by
    adaptive quadrature on that maximizer (in the substituted variable
    v = t^{1+rho1}, which absorbs the endpoint singularity), not from the
    closed form, so it can be compared against the analytic constant as
    an independent identity check.
    """
    if rho1 <= -1.0:
        raise ValueError(f"rho1 must be > -1, got {rho1}")
    if rho2 <= 0.0:
        raise ValueError(
            "rho2 must be positive; at rho2 = 0 the functional degenerates to "
            "the endpoint value W(b_n), covered by eta(path, b_n, 1)"
        )
    beta = (1.0 + rho1) / rho2
    norm = math.sqrt(1.0 - 2.0 / (beta + 1.0) + 1.0 / (2.0 * beta + 1.0))
    f = StrassenExtremal(beta=beta, norm=norm)
    g = rho2 / (1.0 + rho1)
    value, err = integrate.quad(
        lambda v: f(v**g), 0.0, 1.0, limit=200, epsabs=1e-13
    )
    value /= 1.0 + rho1
    if err > 1e-8:
        raise ArithmeticError(f"extremal quadrature did not converge (err={err:.2e})")
    return f, float(value)


@dataclass
class LilTracker:
    """Running iterated-logarithm statistic for one walk observable.

    ``kind`` picks the drift and denominator family: walk kinds track the
    de-drifted partial sum against sqrt(2 n loglog n) (with an extra
    sqrt(log n) at critical memory), center-of-mass kinds track G_n
    against its exact mean with the matching almost-sure constant stored
    in ``constant``.  ``last_stat`` is None until the first update; the
    running maximum starts at 0 and never decreases.
    """

    kind: str
    p: float
    drift_slope: float
    constant: float
    running_max: float = 0.0
    last_stat: float | None = None


def make_tracker(kind: str, p: float, dist: StepDistribution) -> LilTracker:
    """Build a LilTracker with the almost-sure constant for this regime."""
    m1, _, sigma2, mu_check, sigma_check2 = derived_moments(dist, p)
    if kind == "walk_hat":
        if not 0.0 <= p <= 0.5:
            raise ValueError(f"walk_hat requires p in [0, 1/2], got {p}")
        if sigma2 <= 0.0:
            raise ValueError("step distribution is degenerate (sigma2 = 0)")
        const = math.sqrt(sigma2) if p == 0.5 else math.sqrt(sigma2 / (1.0 - 2.0 * p))
        return LilTracker(kind=kind, p=p, drift_slope=m1, constant=const)
    if kind == "walk_check":
        if not 0.0 <= p < 1.0:
            raise ValueError(f"walk_check requires p in [0, 1), got {p}")
        if sigma_check2 <= 0.0:
            raise ValueError("step distribution is degenerate (sigma_check2 = 0)")
        const = math.sqrt(sigma_check2 / (1.0 + 2.0 * p))
        return LilTracker(kind=kind, p=p, drift_slope=mu_check, constant=const)
    if kind == "com_hat_sub":
        const = com_lil_constant("hat_subcritical", p, sigma2)
        return LilTracker(kind=kind, p=p, drift_slope=m1, constant=const)
    if kind == "com_hat_crit":
        const = com_lil_constant("hat_critical", p, sigma2)
        return LilTracker(kind=kind, p=p, drift_slope=m1, constant=const)
    if kind == "com_check":
        const = com_lil_constant("check", p, sigma_check2)
        return LilTracker(kind=kind, p=p, drift_slope=mu_check, constant=const)
    raise ValueError(f"kind must be one of {TRACKER_KINDS}, got {kind!r}")


def _drift(tracker: LilTracker, n):
    if tracker.kind.startswith("com"):
        return tracker.drift_slope * (np.asarray(n, dtype=np.float64) + 1.0) / 2.0
    return tracker.drift_slope * np.asarray(n, dtype=np.float64)


def _denominator(tracker: LilTracker, n):
    nn = np.asarray(n, dtype=np.float64)
    if tracker.kind == "com_hat_crit":
        return np.sqrt(2.0 * nn * np.log(nn) * loglog(np.log(nn)))
    if tracker.kind == "walk_hat" and tracker.p == 0.5:
        return np.sqrt(2.0 * nn * np.log(nn) * loglog(nn))
    return np.sqrt(2.0 * nn * loglog(nn))


def lil_normalizers(tracker: LilTracker, ns) -> tuple[np.ndarray, np.ndarray]:
    """(drift, denominator) arrays at the given step counts (all >= 3).

    Precomputing these lets a streaming caller form the statistic per step
    as |value - drift| / denominator without re-deriving the clock.
    """
    nn = np.asarray(ns, dtype=np.int64)
    if np.any(nn < 3):
        raise ValueError("no iterated-logarithm statistic below n = 3")
    return _drift(tracker, nn), _denominator(tracker, nn)


def lil_stats(tracker: LilTracker, ns, values) -> np.ndarray:
    """Normalized deviations |value − drift(n)| / denom(n), vectorized.

    ``ns`` holds the step counts (all >= 3) aligned with axis 0 of
    ``values``; a second axis of ``values`` ranges over paths.
    """
    nn = np.asarray(ns, dtype=np.int64)
    if np.any(nn < 3):
        raise ValueError("no iterated-logarithm statistic below n = 3")
    v = np.asarray(values, dtype=np.float64)
    dev = np.abs(v - (_drift(tracker, nn)[:, None] if v.ndim == 2 else _drift(tracker, nn)))
    den = _denominator(tracker, nn)
    return dev / (den[:, None] if v.ndim == 2 else den)


def lil_update(tracker: LilTracker, n: int, value: float) -> LilTracker:
    """Fold one observation into the tracker and return it.

    The statistic below n = 3 is undefined (the guard would dominate the
    denominator), so such updates are rejected rather than recorded as 0.
    """
    if n < 3:
        raise ValueError("no iterated-logarithm statistic below n = 3")
    stat = float(abs(value - _drift(tracker, n)) / _denominator(tracker, n))
    tracker.last_stat = stat
    if stat > tracker.running_max:
        tracker.running_max = stat
    return tracker


def lil_running_max(tracker: LilTracker, history, start: int = 3) -> np.ndarray:
    """Largest normalized deviation over k = start..n for each path.

    ``history`` holds the tracked observable at k = 1..n down axis 0 (one
    path per column, or a single 1-d path).  Equivalent to folding every
    row through lil_update, but vectorized.
    """
    h = np.asarray(history, dtype=np.float64)
    one_d = h.ndim == 1
    hh = h.reshape(h.shape[0], -1)
    n = hh.shape[0]
    if start < 3:
        raise ValueError("no iterated-logarithm statistic below n = 3")
    if n < start:
        raise ValueError(f"history ends at n = {n}, before start = {start}")
    best = np.zeros(hh.shape[1])
    max_rows = max(1, _BLOCK_ELEMENTS // hh.shape[1])
    lo = start
    while lo <= n:
        hi = min(n, lo + max_rows - 1)
        ks = np.arange(lo, hi + 1, dtype=np.int64)
        stats = lil_stats(tracker, ks, hh[lo - 1 : hi])
        np.maximum(best, stats.max(axis=0), out=best)
        lo = hi + 1
    return float(best[0]) if one_d else best
