from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reinwalk.coeffs import build_coeff_table
from reinwalk.exact import (
    ReinforcementPlan,
    enumerate_plans,
    exact_distribution,
    martingale_transform,
    mean_recursion,
    signed_counts,
    step_moment_sequences,
    var_recursion,
)
from reinwalk.steps import TruncationRule, finite_discrete, gaussian, rademacher

from oracles import (
    enumerate_histories,
    exact_law_enumerated,
    exact_mean_variance_enumerated,
)

TWO_ATOM = finite_discrete([-1.0, 2.0], [2.0 / 3.0, 1.0 / 3.0])


def test_two_step_plans():
    plans = list(enumerate_plans(2, 0.3))
    assert len(plans) == 2
    assert {pl.choices for pl in plans} == {(0,), (1,)}
    assert {round(pl.prob, 12) for pl in plans} == {0.7, 0.3}


@pytest.mark.parametrize("n", [3, 5, 8])
def test_plan_count_and_mass(n):
    plans = list(enumerate_plans(n, 0.3))
    assert len(plans) == math.factorial(n)
    assert sum(pl.prob for pl in plans) == pytest.approx(1.0, abs=1e-12)


def test_plan_enumeration_bounds():
    with pytest.raises(ValueError):
        list(enumerate_plans(1, 0.3))
    with pytest.raises(ValueError):
        list(enumerate_plans(11, 0.3))
    with pytest.raises(ValueError):
        list(enumerate_plans(4, 1.0))


def test_signed_counts_traces_chains():
    all_fresh = ReinforcementPlan((0, 0, 0), 1.0)
    assert signed_counts(all_fresh, "positive") == (1, 1, 1, 1)
    assert signed_counts(all_fresh, "negative") == (1, 1, 1, 1)
    copy_one = ReinforcementPlan((1,), 1.0)
    assert signed_counts(copy_one, "positive") == (2,)
    assert signed_counts(copy_one, "negative") == (0,)
    chain = ReinforcementPlan((1, 2), 1.0)  # step2 copies 1, step3 copies 2
    assert signed_counts(chain, "negative") == (1,)
    assert signed_counts(chain, "positive") == (3,)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 6),
    p=st.floats(0.0, 0.9),
    data=st.data(),
)
def test_positive_counts_sum_to_n(n, p, data):
    plans = list(enumerate_plans(n, p))
    plan = data.draw(st.sampled_from(plans))
    counts = signed_counts(plan, "positive")
    assert sum(counts) == n
    assert all(c >= 1 for c in counts)
    # negative-mode counts agree with positive ones mod 2 chain parity
    neg = signed_counts(plan, "negative")
    assert len(neg) == len(counts)
    assert all(abs(cn) <= cp for cn, cp in zip(neg, counts))


def test_two_step_law_reference_points():
    law = exact_distribution(2, 0.25, "positive", rademacher())
    assert law.atoms[2.0] == pytest.approx(0.3125, abs=1e-14)
    assert law.atoms[-2.0] == pytest.approx(0.3125, abs=1e-14)
    assert law.atoms[0.0] == pytest.approx(0.375, abs=1e-14)
    law = exact_distribution(2, 0.25, "negative", rademacher())
    assert law.atoms[0.0] == pytest.approx(0.625, abs=1e-14)
    assert law.atoms[2.0] == pytest.approx(0.1875, abs=1e-14)
    assert law.atoms[-2.0] == pytest.approx(0.1875, abs=1e-14)


def test_single_step_law_is_step_law():
    law = exact_distribution(1, 0.9, "positive", TWO_ATOM)
    assert law.atoms == {-1.0: pytest.approx(2.0 / 3.0), 2.0: pytest.approx(1.0 / 3.0)}


def test_continuous_laws_rejected():
    with pytest.raises(ValueError):
        exact_distribution(3, 0.2, "positive", gaussian(0.0, 1.0))


@pytest.mark.parametrize("mode", ["positive", "negative"])
@pytest.mark.parametrize("p", [0.0, 0.3, 0.75])
def test_law_matches_history_enumeration(mode, p):
    # plan+convolution route vs raw history enumeration, atom by atom
    n = 5
    law = exact_distribution(n, p, mode, TWO_ATOM)
    want = exact_law_enumerated(mode, p, n, TWO_ATOM.values, TWO_ATOM.probs)
    assert set(law.atoms) == set(want)
    for v, w in want.items():
        assert law.atoms[v] == pytest.approx(w, abs=1e-12)
    assert law.total_mass() == pytest.approx(1.0, abs=1e-12)


def test_recursion_reference_points():
    ones = finite_discrete([1.0], [1.0])
    means = mean_recursion(3, 0.5, "positive", ones)
    assert means[1] == 1.0
    assert means[2] == pytest.approx(2.0, abs=1e-14)
    assert means[3] == pytest.approx(3.0, abs=1e-14)
    assert np.all(mean_recursion(20, 0.37, "positive", rademacher())[1:] == 0.0)
    assert np.allclose(mean_recursion(20, 0.0, "negative", ones)[1:], np.arange(1, 21))
    variances = var_recursion(2, 0.25, "positive", rademacher())
    assert variances[2] == pytest.approx(2.5, abs=1e-14)
    assert np.allclose(var_recursion(30, 0.0, "positive", rademacher())[1:], np.arange(1, 31))


def test_positive_untruncated_mean_is_linear():
    means = mean_recursion(200, 0.6, "positive", TWO_ATOM)
    assert np.allclose(means[1:], TWO_ATOM.m1 * np.arange(1, 201), rtol=1e-12)


@pytest.mark.parametrize("mode", ["positive", "negative"])
@pytest.mark.parametrize("p", [0.0, 0.3, 0.6])
def test_recursions_match_enumeration(mode, p):
    n = 6
    want_mean, want_var = exact_mean_variance_enumerated(
        mode, p, n, TWO_ATOM.values, TWO_ATOM.probs
    )
    means = mean_recursion(n, p, mode, TWO_ATOM)
    variances = var_recursion(n, p, mode, TWO_ATOM)
    assert means[n] == pytest.approx(want_mean, abs=1e-10)
    assert variances[n] == pytest.approx(want_var, abs=1e-10)


@pytest.mark.parametrize("mode", ["positive", "negative"])
def test_truncated_recursions_match_enumeration(mode):
    # alpha=1 bites: |-2| > 1 at step 1, |3| > 2^1 at steps 1..2
    dist = finite_discrete([-2.0, 0.5, 3.0], [0.25, 0.5, 0.25])
    rule = TruncationRule(alpha=1.0, enabled=True)
    n, p = 5, 0.4
    want_mean, want_var = exact_mean_variance_enumerated(
        mode, p, n, dist.values, dist.probs, trunc_alpha=1.0
    )
    means = mean_recursion(n, p, mode, dist, rule)
    variances = var_recursion(n, p, mode, dist, rule)
    assert means[n] == pytest.approx(want_mean, abs=1e-10)
    assert variances[n] == pytest.approx(want_var, abs=1e-10)


def test_subcritical_variance_growth_band():
    variances = var_recursion(10**5, 0.25, "positive", rademacher())
    ratio = variances[10**5] * (1.0 - 2.0 * 0.25) / 10**5
    assert 0.99 <= ratio <= 1.01


def test_step_moment_sequences_shapes():
    rule = TruncationRule(alpha=1.0, enabled=True)
    ez, ez2 = step_moment_sequences(TWO_ATOM, TruncationRule(), 5)
    assert np.isnan(ez[0]) and np.all(ez[1:] == TWO_ATOM.m1)
    ez, ez2 = step_moment_sequences(rademacher(), rule, 5)
    assert np.all(ez[1:] == 0.0) and np.all(ez2[1:] == 1.0)
    dist = finite_discrete([-2.0, 0.5], [0.5, 0.5])
    ez, ez2 = step_moment_sequences(dist, rule, 3)
    assert ez[1] == pytest.approx(0.25)  # only the 0.5 atom survives n=1
    assert ez[2] == pytest.approx(dist.m1)  # threshold 2 admits both


def walk_array(seed, n, p, mode):
    # tiny reference walk, independent of the engine module
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    for i in range(n):
        if i == 0 or rng.random() >= p:
            out[i] = 1.0 if rng.random() < 0.5 else -1.0
        else:
            j = rng.integers(0, i)
            out[i] = out[j] if mode == "positive" else -out[j]
    return out


@pytest.mark.parametrize("mode,p", [("positive", 0.25), ("negative", 0.5), ("positive", 0.0)])
def test_martingale_telescopes_exactly(mode, p):
    n = 400
    z = walk_array(11, n, p, mode)
    table = build_coeff_table(mode, p, n)
    path = martingale_transform(z, p, mode, table, rademacher())
    assert np.allclose(
        np.cumsum(path.increments[1:]), path.martingale[1:], atol=1e-9, rtol=0
    )
    assert path.increments[1] == pytest.approx(z[0] - 0.0)


def test_memoryless_normalized_cumvar_is_one():
    n = 50
    z = walk_array(3, n, 0.0, "positive")
    table = build_coeff_table("positive", 0.0, n)
    path = martingale_transform(z, 0.0, "positive", table, rademacher())
    assert np.allclose(path.normalized_cumvar[1:], 1.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    p=st.floats(0.0, 0.9),
    mode=st.sampled_from(["positive", "negative"]),
    seed=st.integers(0, 2**31),
)
def test_martingale_telescoping_property(p, mode, seed):
    z = walk_array(seed, 60, p, mode)
    table = build_coeff_table(mode, p, 60)
    path = martingale_transform(z, p, mode, table, rademacher())
    assert np.allclose(
        np.cumsum(path.increments[1:]), path.martingale[1:], atol=1e-10, rtol=0
    )


@pytest.mark.parametrize("mode", ["positive", "negative"])
def test_martingale_increments_have_zero_conditional_mean(mode):
    # Group full histories by realized prefix; within each group the
    # probability-weighted increment at the last step must vanish.
    n, p = 4, 0.3
    table = build_coeff_table(mode, p, n)
    cells: dict = {}
    for realized, prob in enumerate_histories(mode, p, n, [-1.0, 1.0], [0.5, 0.5]):
        path = martingale_transform(np.array(realized), p, mode, table, rademacher())
        key = realized[: n - 1]
        acc = cells.setdefault(key, [0.0, 0.0])
        acc[0] += prob * path.increments[n]
        acc[1] += prob
    for key, (weighted_y, mass) in cells.items():
        assert abs(weighted_y) <= 1e-12 * max(mass, 1e-30)


def test_martingale_table_mismatch_rejected():
    table = build_coeff_table("positive", 0.25, 10)
    with pytest.raises(ValueError):
        martingale_transform(np.ones(5), 0.3, "positive", table, rademacher())
    with pytest.raises(ValueError):
        martingale_transform(np.ones(5), 0.25, "negative", table, rademacher())
    with pytest.raises(ValueError):
        martingale_transform(np.ones(20), 0.25, "positive", table, rademacher())
