"""Exact small-n laws and exact moment recursions; ground truth for MC runs.

Two independent routes to the same quantities live here on purpose:

* full enumeration of reinforcement plans (who copies whom), giving the
  exact law of S_n for finite step laws at small n;
* one-step mean/variance recursions that scale to any n.

The enumeration is over plans rather than raw (step, coin, index) tuples:
fresh draws are i.i.d. and enter the sum only through the signed
multiplicity each fresh step accumulates along copy chains, so a plan
plus a convolution of scaled step laws covers every history at once.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .coeffs import VALID_MODES, CoeffTable
from .steps import StepDistribution, TruncationRule, derived_moments, truncated_moments

PLAN_CAP = 10  # n! plans; 10! ~ 3.6e6 is the most a laptop should chew


@dataclass(frozen=True)
class ReinforcementPlan:
    """Copy structure of one n-step history.

    ``choices[i]`` decides step i+2: 0 draws fresh, j >= 1 copies realized
    step j.  ``prob`` multiplies (1-p) per fresh choice and p/(k-1) per
    copy at step k; fresh step values are not part of a plan.
    """

    choices: tuple[int, ...]
    prob: float


def enumerate_plans(n: int, p: float):
    """Yield every reinforcement plan for an n-step walk, n! in total.

    Plan probabilities sum to 1 over the stream.  n is capped: the count
    grows factorially.
    """
    if n < 2:
        raise ValueError(f"plan enumeration needs n >= 2, got {n}")
    if n > PLAN_CAP:
        raise ValueError(f"n = {n} exceeds the enumeration cap {PLAN_CAP}")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"memory parameter p must be in [0, 1), got {p}")
    per_step = []
    for k in range(2, n + 1):
        opts = [(0, 1.0 - p)] + [(j, p / (k - 1)) for j in range(1, k)]
        per_step.append(opts)
    for combo in itertools.product(*per_step):
        prob = 1.0
        for _, w in combo:
            prob *= w
        yield ReinforcementPlan(tuple(c for c, _ in combo), prob)


def signed_counts(plan: ReinforcementPlan, mode: str) -> tuple[int, ...]:
    """Multiplicity each fresh step contributes to S_n under the plan.

    Copy chains are traced back to their fresh ancestor; in negative mode
    every hop flips the sign, so counts can cancel to 0.  Entry order
    follows the fresh steps' order of appearance (step 1 first).
    """
    if mode not in VALID_MODES:
        raise ValueError(f"mode must be one of {VALID_MODES}, got {mode!r}")
    hop = -1 if mode == "negative" else 1
    ancestor = [0]
    sign = [1]
    n_fresh = 1
    for c in plan.choices:
        if c == 0:
            ancestor.append(n_fresh)
            sign.append(1)
            n_fresh += 1
        else:
            ancestor.append(ancestor[c - 1])
            sign.append(sign[c - 1] * hop)
    counts = [0] * n_fresh
    for a, s in zip(ancestor, sign):
        counts[a] += s
    return tuple(counts)


@dataclass
class ExactDistribution:
    """Finitely supported law as a value -> probability map."""

    atoms: dict

    def total_mass(self) -> float:
        return sum(self.atoms.values())

    def mean(self) -> float:
        return sum(v * w for v, w in self.atoms.items())

    def variance(self) -> float:
        m1 = self.mean()
        return sum(v * v * w for v, w in self.atoms.items()) - m1 * m1

    def sorted_atoms(self):
        return sorted(self.atoms.items())


def _step_atoms(dist: StepDistribution):
    if dist.kind == "rademacher":
        return ((-1.0, 0.5), (1.0, 0.5))
    if dist.kind == "discrete":
        return tuple(zip(dist.values, dist.probs))
    raise ValueError(f"exact laws need a finite step law, got kind {dist.kind!r}")


def exact_distribution(
    n: int, p: float, mode: str, dist: StepDistribution
) -> ExactDistribution:
    """Exact law of S_n: mixture over plans of convolved scaled step laws.

    Atoms are keyed by exact float values; merging is only exact when
    sums of scaled step values are exactly representable (integers and
    dyadic rationals are; Rademacher sums are plain integers).
    """
    if mode not in VALID_MODES:
        raise ValueError(f"mode must be one of {VALID_MODES}, got {mode!r}")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"memory parameter p must be in [0, 1), got {p}")
    step_atoms = _step_atoms(dist)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n == 1:
        law: dict = {}
        for v, w in step_atoms:
            law[float(v)] = law.get(float(v), 0.0) + w
        return ExactDistribution(law)

    conv_cache: dict = {}

    def convolved(counts: tuple[int, ...]) -> dict:
        key = tuple(sorted(c for c in counts if c != 0))
        got = conv_cache.get(key)
        if got is None:
            got = {0.0: 1.0}
            for c in key:
                nxt: dict = {}
                for s, q in got.items():
                    for v, w in step_atoms:
                        t = s + c * v
                        nxt[t] = nxt.get(t, 0.0) + q * w
                got = nxt
            conv_cache[key] = got
        return got

    mix: dict = {}
    for plan in enumerate_plans(n, p):
        if plan.prob == 0.0:
            continue
        for v, w in convolved(signed_counts(plan, mode)).items():
            mix[v] = mix.get(v, 0.0) + plan.prob * w
    return ExactDistribution(mix)


def step_moment_sequences(dist: StepDistribution, rule: TruncationRule, n_max: int):
    """Arrays (EZ_n, EZ_n^2) for n = 1..n_max; slot 0 is NaN.

    Z_n is the step at index n after truncation.  Constant when the rule
    is off or provably inert (Rademacher under any positive alpha).
    """
    ez = np.full(n_max + 1, np.nan)
    ez2 = np.full(n_max + 1, np.nan)
    if not rule.enabled or dist.kind == "rademacher":
        ez[1:] = dist.m1 if not rule.enabled else 0.0
        ez2[1:] = dist.m2 if not rule.enabled else 1.0
        return ez, ez2
    for n in range(1, n_max + 1):
        ez[n], ez2[n] = truncated_moments(dist, n, rule)
    return ez, ez2


def _moment_recursions(n_max, p, mode, dist, rule):
    if mode not in VALID_MODES:
        raise ValueError(f"mode must be one of {VALID_MODES}, got {mode!r}")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"memory parameter p must be in [0, 1), got {p}")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    ez, ez2 = step_moment_sequences(dist, rule, n_max)
    sign = 1.0 if mode == "positive" else -1.0
    means = np.full(n_max + 1, np.nan)
    variances = np.full(n_max + 1, np.nan)
    e = ez[1]
    r2_sum = ez2[1]  # running sum of E(Z_k^2) over realized steps
    v = ez2[1] - e * e
    means[1] = e
    variances[1] = v
    for n in range(1, n_max):
        # one-step conditional mean/second moment of the realized step n+1
        e_step = sign * (p / n) * e + (1.0 - p) * ez[n + 1]
        r2_step = (1.0 - p) * ez2[n + 1] + (p / n) * r2_sum
        v = ((n + sign * 2.0 * p) / n) * v + (r2_step - e_step * e_step)
        e = ((n + sign * p) / n) * e + (1.0 - p) * ez[n + 1]
        r2_sum += r2_step
        means[n + 1] = e
        variances[n + 1] = v
    return means, variances


def mean_recursion(n_max, p, mode, dist, rule=TruncationRule()) -> np.ndarray:
    """E(S_n) for n = 1..n_max by the one-step recursion; slot 0 is NaN.

    Positive mode multiplies by (n+p)/n per step, negative by (n-p)/n,
    each plus (1-p) E(Z_{n+1}); untruncated positive sums have mean
    n * m1 exactly.
    """
    means, _ = _moment_recursions(n_max, p, mode, dist, rule)
    return means


def var_recursion(n_max, p, mode, dist, rule=TruncationRule()) -> np.ndarray:
    """Var(S_n) for n = 1..n_max; slot 0 is NaN.

    Var picks up a (n ± 2p)/n factor per step plus the one-step conditional
    step variance, which itself needs the running sum of E(Z_k^2).
    """
    _, variances = _moment_recursions(n_max, p, mode, dist, rule)
    return variances


@dataclass
class MartingalePath:
    """Per-path martingale decomposition of the de-biased sum.

    All arrays are indexed 1..n with slot 0 NaN: ``increments`` holds the
    differences Y_n, ``cond_var`` their one-step conditional variances,
    ``martingale`` the running a_n (S_n - E S_n), and ``normalized_cumvar``
    the running conditional variance over its almost sure scale
    sigma^2 s_n^2 (which tends to 1).
    """

    increments: np.ndarray
    cond_var: np.ndarray
    martingale: np.ndarray
    normalized_cumvar: np.ndarray


def martingale_transform(
    realized,
    p: float,
    mode: str,
    table: CoeffTable,
    dist: StepDistribution,
    rule: TruncationRule = TruncationRule(),
) -> MartingalePath:
    """Decompose a recorded path into martingale differences.

    ``realized`` are the realized (post-truncation) step values Z_1..Z_n.
    The conditional mean of step n+1 given the past is
    ±(p/n) S_n + (1-p) E Z_{n+1} and its conditional second moment is
    (1-p) E(Z_{n+1}^2) + (p/n) sum_k Z_k^2, both functions of the realized
    path, so the whole decomposition is exact path arithmetic.  The sum of
    the differences telescopes to ``martingale`` identically.
    """
    z = np.asarray(realized, dtype=np.float64)
    n = z.size
    if n < 1:
        raise ValueError("need at least one realized step")
    if table.mode != mode or table.p != p:
        raise ValueError(
            f"coefficient table is for ({table.mode}, p={table.p}), "
            f"asked for ({mode}, p={p})"
        )
    if table.n_max < n:
        raise ValueError(f"coefficient table covers n <= {table.n_max}, path has {n}")
    sign = 1.0 if mode == "positive" else -1.0
    a = np.exp(table.log_a[1 : n + 1])
    ez, ez2 = step_moment_sequences(dist, rule, n)
    s = np.cumsum(z)
    q = np.cumsum(z * z)
    cond_mean = np.empty(n)
    cond_e2 = np.empty(n)
    cond_mean[0] = ez[1]
    cond_e2[0] = ez2[1]
    if n > 1:
        k = np.arange(1, n, dtype=np.float64)  # past length before step k+1
        cond_mean[1:] = sign * (p / k) * s[:-1] + (1.0 - p) * ez[2:]
        cond_e2[1:] = (1.0 - p) * ez2[2:] + (p / k) * q[:-1]
    y = a * (z - cond_mean)
    cond_var = a * a * (cond_e2 - cond_mean * cond_mean)
    means = mean_recursion(n, p, mode, dist, rule)
    mart = a * (s - means[1:])
    _, _, sigma2, _, sigma_check2 = derived_moments(dist, p)
    scale = sigma2 if mode == "positive" else sigma_check2
    if scale <= 0.0:
        raise ValueError("degenerate step law: zero variance")
    cum = np.cumsum(cond_var) / (scale * table.s2[1 : n + 1])

    def padded(x):
        out = np.full(n + 1, np.nan)
        out[1:] = x
        return out

    return MartingalePath(
        increments=padded(y),
        cond_var=padded(cond_var),
        martingale=padded(mart),
        normalized_cumvar=padded(cum),
    )
