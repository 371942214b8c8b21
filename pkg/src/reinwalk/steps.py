"""Step distributions, their moments, and index-dependent truncation.

Four step laws are supported: Rademacher, finite discrete, Gaussian and
uniform.  All sampling is inverse-CDF on unit uniforms from the counter
RNG (:mod:`reinwalk.rng`), so a path is a pure function of its key and the
engines can replay or batch draws freely.

Truncation kills a step whose magnitude exceeds n^alpha at its own index
n (it does not resample), which is the form the strong approximation
arguments need; truncated first and second moments are available in
closed form for every variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .rng import RngStream

_SQRT_2PI = math.sqrt(2.0 * math.pi)

KINDS = ("rademacher", "discrete", "gaussian", "uniform")


@dataclass(frozen=True)
class StepDistribution:
    """One of the four step laws with cached first and second moments.

    Only the fields of the active variant are meaningful; use the factory
    functions (or :func:`distribution_from_spec`) rather than the raw
    constructor.
    """

    kind: str
    m1: float
    m2: float
    values: tuple = ()
    probs: tuple = ()
    cum: tuple = ()
    mean: float = 0.0
    sd: float = 1.0
    lo: float = 0.0
    hi: float = 1.0

    @property
    def sigma2(self) -> float:
        return self.m2 - self.m1 * self.m1

    @property
    def bounded_by(self) -> float | None:
        """Supremum of |X| when the support is bounded, else None."""
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "discrete":
            return max(abs(v) for v in self.values)
        if self.kind == "uniform":
            return max(abs(self.lo), abs(self.hi))
        return None


def rademacher() -> StepDistribution:
    return StepDistribution(kind="rademacher", m1=0.0, m2=1.0)


def finite_discrete(values, probs) -> StepDistribution:
    values = tuple(float(v) for v in values)
    probs = tuple(float(q) for q in probs)
    if len(values) != len(probs) or not values:
        raise ValueError("values and probs must be equal-length and nonempty")
    if any(q < 0.0 for q in probs):
        raise ValueError("probs must be nonnegative")
    if abs(sum(probs) - 1.0) > 1e-12:
        raise ValueError(f"probs must sum to 1, got {sum(probs)}")
    cum = tuple(np.cumsum(probs))
    m1 = float(np.dot(values, probs))
    m2 = float(np.dot(np.square(values), probs))
    return StepDistribution(
        kind="discrete", m1=m1, m2=m2, values=values, probs=probs, cum=cum
    )


def gaussian(mean: float, sd: float) -> StepDistribution:
    if not sd > 0.0:
        raise ValueError(f"sd must be positive, got {sd}")
    return StepDistribution(
        kind="gaussian", m1=mean, m2=sd * sd + mean * mean, mean=mean, sd=sd
    )


def uniform(lo: float, hi: float) -> StepDistribution:
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    m1 = 0.5 * (lo + hi)
    m2 = (hi * hi + hi * lo + lo * lo) / 3.0
    return StepDistribution(kind="uniform", m1=m1, m2=m2, lo=lo, hi=hi)


def distribution_from_spec(spec: dict) -> StepDistribution:
    """Build a distribution from its JSON form.

    {"kind":"rademacher"} | {"kind":"discrete","values":[...],"probs":[...]}
    | {"kind":"gaussian","mean":m,"sd":s} | {"kind":"uniform","lo":a,"hi":b}
    """
    kind = spec.get("kind")
    if kind == "rademacher":
        return rademacher()
    if kind == "discrete":
        return finite_discrete(spec["values"], spec["probs"])
    if kind == "gaussian":
        return gaussian(spec["mean"], spec["sd"])
    if kind == "uniform":
        return uniform(spec["lo"], spec["hi"])
    raise ValueError(f"unknown distribution kind {kind!r}")


def distribution_spec(dist: StepDistribution) -> dict:
    """Inverse of :func:`distribution_from_spec`."""
    if dist.kind == "rademacher":
        return {"kind": "rademacher"}
    if dist.kind == "discrete":
        return {"kind": "discrete", "values": list(dist.values), "probs": list(dist.probs)}
    if dist.kind == "gaussian":
        return {"kind": "gaussian", "mean": dist.mean, "sd": dist.sd}
    return {"kind": "uniform", "lo": dist.lo, "hi": dist.hi}


def quantile(dist: StepDistribution, u):
    """Inverse CDF, the single transform behind all sampling.

    Accepts scalars or arrays of uniforms in (0,1).  Rademacher maps
    u < 1/2 to -1; discrete picks the first atom whose cumulative weight
    reaches u.
    """
    u = np.asarray(u, dtype=np.float64)
    if dist.kind == "rademacher":
        out = np.where(u < 0.5, -1.0, 1.0)
    elif dist.kind == "discrete":
        idx = np.searchsorted(np.asarray(dist.cum), u, side="left")
        idx = np.minimum(idx, len(dist.values) - 1)
        out = np.asarray(dist.values, dtype=np.float64)[idx]
    elif dist.kind == "gaussian":
        out = dist.mean + dist.sd * ndtri(u)
    else:
        out = dist.lo + (dist.hi - dist.lo) * u
    return out if out.ndim else float(out)


def sample_step(dist: StepDistribution, rng_state: RngStream) -> float:
    """One draw from dist, advancing the caller's stream by one counter."""
    return quantile(dist, rng_state.next_uniform())


def derived_moments(dist: StepDistribution, p: float):
    """Moment bundle (m1, m2, sigma2, mu_check, sigma_check2) at memory p.

    mu_check = (1-p) m1 / (1+p) is the long-run step mean of the
    negatively reinforced walk and sigma_check2 = m2 - mu_check^2 its
    residual variance; at p=0 both collapse to (m1, sigma2).
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"memory parameter p must be in [0, 1), got {p}")
    sigma2 = dist.m2 - dist.m1 * dist.m1
    mu_check = (1.0 - p) * dist.m1 / (1.0 + p)
    sigma_check2 = dist.m2 - mu_check * mu_check
    return dist.m1, dist.m2, sigma2, mu_check, sigma_check2


@dataclass(frozen=True)
class TruncationRule:
    """Kill steps with |x| > n^alpha at their own index n.

    Disabled by default; alpha defaults to 1/3 (the 1/(2+delta) choice at
    delta = 1).  Copies made later by the reinforcement engine replay the
    stored realized value and are never re-truncated.
    """

    alpha: float = 1.0 / 3.0
    enabled: bool = False

    def __post_init__(self):
        if self.enabled and not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive when enabled, got {self.alpha}")

    def threshold(self, n):
        """n^alpha, or +inf when disabled."""
        n = np.asarray(n, dtype=np.float64)
        out = n**self.alpha if self.enabled else np.full(n.shape, np.inf)
        return out if out.ndim else float(out)


def truncate(x, n, rule: TruncationRule):
    """x if |x| <= n^alpha or rule disabled, else 0; n must be >= 1."""
    if np.any(np.asarray(n) < 1):
        raise ValueError("step index n must be >= 1")
    if not rule.enabled:
        return x
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) <= rule.threshold(n), x, 0.0)
    return out if out.ndim else float(out)


def truncated_moments(dist: StepDistribution, n: int, rule: TruncationRule):
    """(E[Z], E[Z^2]) for Z = X 1{|X| <= n^alpha}, in closed form.

    With the rule disabled this is just (m1, m2).
    """
    if n < 1:
        raise ValueError("step index n must be >= 1")
    if not rule.enabled:
        return dist.m1, dist.m2
    c = float(n) ** rule.alpha
    if dist.kind == "rademacher":
        return (0.0, 1.0) if c >= 1.0 else (0.0, 0.0)
    if dist.kind == "discrete":
        keep = [(v, q) for v, q in zip(dist.values, dist.probs) if abs(v) <= c]
        ez = sum(v * q for v, q in keep)
        ez2 = sum(v * v * q for v, q in keep)
        return ez, ez2
    if dist.kind == "gaussian":
        # X = mean + sd*xi, xi standard normal restricted to [a, b].
        a = (-c - dist.mean) / dist.sd
        b = (c - dist.mean) / dist.sd
        phi_a = math.exp(-0.5 * a * a) / _SQRT_2PI
        phi_b = math.exp(-0.5 * b * b) / _SQRT_2PI
        mass = ndtr(b) - ndtr(a)
        e_xi = phi_a - phi_b
        e_xi2 = mass + a * phi_a - b * phi_b
        ez = dist.mean * mass + dist.sd * e_xi
        ez2 = (
            dist.mean * dist.mean * mass
            + 2.0 * dist.mean * dist.sd * e_xi
            + dist.sd * dist.sd * e_xi2
        )
        return ez, ez2
    lo, hi = max(dist.lo, -c), min(dist.hi, c)
    if lo >= hi:
        return 0.0, 0.0
    width = dist.hi - dist.lo
    ez = (hi * hi - lo * lo) / (2.0 * width)
    ez2 = (hi**3 - lo**3) / (3.0 * width)
    return ez, ez2
