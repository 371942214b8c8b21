"""Normalization coefficients and limiting constants for reinforced walks.

A step-reinforced walk with memory parameter p repeats one of its own past
steps with probability p (positive mode replays it, negative mode replays it
with flipped sign) and draws a fresh step otherwise.  De-biasing the partial
sums requires the product coefficients

    positive:  gamma_n = (n + p) / n,   a_1 = 1,  a_{n+1} = a_n / gamma_n
    negative:  gamma_n = (n - p) / n

together with the running sum of squares s_n^2 = sum_{k<=n} a_k^2.  The
products collapse to Gamma-function ratios (a_n = Gamma(n)Gamma(1+p)/Gamma(n+p)
in positive mode and the mirrored form with -p in negative mode); that closed
form is kept in the test suite as an independent cross-check while the table
itself is built by the recursion in log space, which stays finite for any
practical n (the raw products under/overflow long before n reaches 1e8).

Also collected here: the limiting constants of the iterated-logarithm laws
for time averages of such walks.  For a process M_n ~ a(n) W(b(n)) with a
regularly varying of index rho1 > -1 and b regularly varying of index
rho2 >= 0, the running average (1/n) sum M_k obeys a LIL whose constant
depends only on (rho1, rho2); ``lil_constant`` returns it and
``variance_limit`` the variance of the limiting integral functional
int_0^1 t^rho1 W(t^rho2) dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

E_E = math.exp(math.e)  # loglog guard threshold; loglog(E_E) == 1

VALID_MODES = ("positive", "negative")
SCHEDULE_KINDS = ("hat_subcritical", "hat_critical", "check")


def loglog(x):
    """Guarded double logarithm: log(log(max(x, e^e))), clamping at 1.

    Keeps iterated-logarithm denominators positive and monotone for small
    arguments instead of exploding or going negative.  Accepts scalars or
    arrays.
    """
    return np.log(np.log(np.maximum(x, E_E)))


@dataclass
class CoeffTable:
    """De-biasing coefficients for one (mode, p), indexed 1..n_max.

    ``log_a[n]`` is log a_n and ``s2[n]`` is s_n^2; slot 0 is unused (NaN)
    so indices match the math.
    """

    mode: str
    p: float
    n_max: int
    log_a: np.ndarray = field(repr=False)
    s2: np.ndarray = field(repr=False)


def build_coeff_table(mode: str, p: float, n_max: int) -> CoeffTable:
    """Build the coefficient table by the log-space recursion.

    log a_{n+1} = log a_n - log((n ± p)/n); s_n^2 accumulated in linear
    space from exp(2 log a_k), which is safe: a_n^2 stays within float range
    for p in [0, 1) out to n ~ 1e8 and the sum is monotone.
    """
    if mode not in VALID_MODES:
        raise ValueError(f"mode must be one of {VALID_MODES}, got {mode!r}")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"memory parameter p must be in [0, 1), got {p}")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    sign = 1.0 if mode == "positive" else -1.0
    k = np.arange(1, n_max, dtype=np.float64)
    # log gamma_k = log((k ± p)/k) = log1p(±p/k), accurate for large k.
    log_gamma = np.log1p(sign * p / k)
    log_a = np.empty(n_max + 1)
    log_a[0] = np.nan
    log_a[1] = 0.0
    if n_max > 1:
        log_a[2:] = -np.cumsum(log_gamma)
    s2 = np.empty(n_max + 1)
    s2[0] = np.nan
    s2[1:] = np.cumsum(np.exp(2.0 * log_a[1:]))
    return CoeffTable(mode=mode, p=p, n_max=n_max, log_a=log_a, s2=s2)


def coeff_ratio(table: CoeffTable, n) -> float | np.ndarray:
    """a_n / s_n, the martingale-difference scale at time n.

    Decays like sqrt(1-2p)/sqrt(n) (positive, p < 1/2), 1/sqrt(n log n)
    (positive, p = 1/2) and sqrt(1+2p)/sqrt(n) (negative).
    """
    n = np.asarray(n)
    if n.size and (np.any(n < 1) or np.any(n > table.n_max)):
        raise ValueError("n out of table range")
    out = np.exp(table.log_a[n]) / np.sqrt(table.s2[n])
    return out if out.ndim else float(out)


def lil_constant(rho1: float, rho2: float) -> float:
    """Iterated-logarithm constant for averaged regularly varying scales.

    sqrt(2) * ((1 + rho1 + rho2)(2 + 2 rho1 + rho2))**(-1/2) for
    rho1 > -1, rho2 >= 0.
    """
    if rho1 <= -1.0:
        raise ValueError(f"rho1 must be > -1, got {rho1}")
    if rho2 < 0.0:
        raise ValueError(f"rho2 must be >= 0, got {rho2}")
    return math.sqrt(2.0 / ((1.0 + rho1 + rho2) * (2.0 + 2.0 * rho1 + rho2)))


def variance_limit(rho1: float, rho2: float) -> float:
    """Variance of int_0^1 t^rho1 W(t^rho2) dt; equals lil_constant**2."""
    if rho1 <= -1.0:
        raise ValueError(f"rho1 must be > -1, got {rho1}")
    if rho2 < 0.0:
        raise ValueError(f"rho2 must be >= 0, got {rho2}")
    return 2.0 / ((1.0 + rho1 + rho2) * (2.0 + 2.0 * rho1 + rho2))


def com_lil_constant(kind: str, p: float, sigma2: float) -> float:
    """Limsup constant for the centered center of mass of a reinforced walk.

    ``sigma2`` is the step variance in the matching sense: Var(X) for the
    positive-mode kinds, the negative-mode residual variance m2 - mu^2 for
    ``check``.  Kinds:

    - hat_subcritical (p < 1/2): sqrt(2 sigma2 / (3 (2-p)(1-2p))), against
      the denominator sqrt(2 n loglog n);
    - hat_critical (p = 1/2): (2/3) sqrt(sigma2), against
      sqrt(2 n log n logloglog n);
    - check (negative mode, p < 1): sqrt(2 sigma2 / (3 (2+p)(1+2p))).
    """
    if sigma2 <= 0.0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if kind == "hat_subcritical":
        if not 0.0 <= p < 0.5:
            raise ValueError(f"hat_subcritical requires p in [0, 1/2), got {p}")
        return math.sqrt(2.0 * sigma2 / (3.0 * (2.0 - p) * (1.0 - 2.0 * p)))
    if kind == "hat_critical":
        if p != 0.5:
            raise ValueError(f"hat_critical requires p = 1/2, got {p}")
        return (2.0 / 3.0) * math.sqrt(sigma2)
    if kind == "check":
        if not 0.0 <= p < 1.0:
            raise ValueError(f"check requires p in [0, 1), got {p}")
        return math.sqrt(2.0 * sigma2 / (3.0 * (2.0 + p) * (1.0 + 2.0 * p)))
    raise ValueError(f"kind must be one of {SCHEDULE_KINDS}, got {kind!r}")


def erw_lil_constant(q: float) -> float:
    """Center-of-mass LIL constant for an elephant random walk, memory q.

    sqrt(2) / sqrt(3 (3-2q)(3-4q)) for q in (0, 3/4).  Under the mapping to
    reinforced Rademacher walks (q >= 1/2 -> positive p = 2q-1, q < 1/2 ->
    negative p = 1-2q) this coincides with :func:`com_lil_constant`.
    """
    if not 0.0 < q < 0.75:
        raise ValueError(f"q must be in (0, 3/4), got {q}")
    return math.sqrt(2.0 / (3.0 * (3.0 - 2.0 * q) * (3.0 - 4.0 * q)))


@dataclass(frozen=True)
class NormalizationSchedule:
    """Variance growth and averaging weights for one walk regime.

    ``sigma_n2(n)`` is the variance scale of the de-drifted partial sum,
    ``b_n(n)`` the Brownian clock it rides on (sigma_n2 = n^{2p} b_n in the
    positive kinds and n^{-2p} b_n in the negative kind), ``weight(k)`` the
    log-averaging weight and ``log_normalizer(n)`` its running total scale.
    ``sigma2`` is the step variance in the mode-matching sense (see
    :func:`com_lil_constant`).
    """

    kind: str
    p: float
    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.kind == "hat_subcritical":
            if not 0.0 <= self.p < 0.5:
                raise ValueError(f"hat_subcritical requires p in [0, 1/2), got {self.p}")
        elif self.kind == "hat_critical":
            if self.p != 0.5:
                raise ValueError(f"hat_critical requires p = 1/2, got {self.p}")
        elif self.kind == "check":
            if not 0.0 <= self.p < 1.0:
                raise ValueError(f"check requires p in [0, 1), got {self.p}")
        else:
            raise ValueError(f"kind must be one of {SCHEDULE_KINDS}, got {self.kind!r}")

    def sigma_n2(self, n):
        n = np.asarray(n, dtype=np.float64)
        if self.kind == "hat_subcritical":
            out = self.sigma2 * n / (1.0 - 2.0 * self.p)
        elif self.kind == "hat_critical":
            out = self.sigma2 * n * np.log(n)
        else:
            out = self.sigma2 * n / (1.0 + 2.0 * self.p)
        return out if out.ndim else float(out)

    def b_n(self, n):
        """Brownian clock; strictly increasing on n >= 1 (positive from n >= 2
        in the critical kind, where b_1 = 0)."""
        n = np.asarray(n, dtype=np.float64)
        if self.kind == "hat_subcritical":
            out = self.sigma2 * n ** (1.0 - 2.0 * self.p) / (1.0 - 2.0 * self.p)
        elif self.kind == "hat_critical":
            out = self.sigma2 * np.log(n)
        else:
            out = self.sigma2 * n ** (1.0 + 2.0 * self.p) / (1.0 + 2.0 * self.p)
        return out if out.ndim else float(out)

    def weight(self, k):
        """Averaging weight: 1/k, except 1/(k log k) from k = 2 in the
        critical kind (the k = 1 term is dropped there)."""
        k = np.asarray(k, dtype=np.float64)
        if self.kind == "hat_critical":
            safe = np.maximum(k, 2.0)
            out = np.where(k >= 2.0, 1.0 / (safe * np.log(safe)), 0.0)
        else:
            out = 1.0 / k
        return out if out.ndim else float(out)

    def log_normalizer(self, n):
        """log n, or guarded loglog n in the critical kind."""
        n = np.asarray(n, dtype=np.float64)
        out = loglog(n) if self.kind == "hat_critical" else np.log(n)
        return out if out.ndim else float(out)
