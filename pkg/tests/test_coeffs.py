from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reinwalk.coeffs import (
    NormalizationSchedule,
    build_coeff_table,
    coeff_ratio,
    com_lil_constant,
    erw_lil_constant,
    lil_constant,
    loglog,
    variance_limit,
)

from oracles import brownian_average_variance_quad, coeff_gamma_formula


def test_first_coefficients_by_hand():
    # positive p=0.25: a_2 = 1/gamma_1 = 1/1.25
    t = build_coeff_table("positive", 0.25, 4)
    assert math.exp(t.log_a[1]) == 1.0
    assert math.exp(t.log_a[2]) == pytest.approx(0.8, rel=1e-14)
    # negative p=0.5: gamma_1 = (1-0.5)/1, so a_2 = 2
    t = build_coeff_table("negative", 0.5, 4)
    assert math.exp(t.log_a[2]) == pytest.approx(2.0, rel=1e-14)


def test_memoryless_table_is_trivial():
    for mode in ("positive", "negative"):
        t = build_coeff_table(mode, 0.0, 50)
        assert np.allclose(np.exp(t.log_a[1:]), 1.0, rtol=0, atol=1e-15)
        assert np.allclose(t.s2[1:], np.arange(1, 51), rtol=1e-14)


@settings(max_examples=80, deadline=None)
@given(
    mode=st.sampled_from(["positive", "negative"]),
    p=st.floats(0.0, 0.95),
    n=st.integers(1, 400),
)
def test_recursion_matches_gamma_closed_form(mode, p, n):
    t = build_coeff_table(mode, p, n)
    want = coeff_gamma_formula(mode, p, n)
    assert math.exp(t.log_a[n]) == pytest.approx(want, rel=1e-10)


def test_square_sums_strictly_increase():
    for mode, p in [("positive", 0.3), ("positive", 0.5), ("negative", 0.7)]:
        t = build_coeff_table(mode, p, 2000)
        assert np.all(np.diff(t.s2[1:]) > 0)


def test_ratio_asymptotics():
    """a_n/s_n approaches its regularly varying profile.

    positive, p < 1/2:  sqrt(1-2p)/sqrt(n)        (relative error O(n^{2p-1}))
    positive, p = 1/2:  1/sqrt(n log n)           (relative error O(1/log n))
    negative:           sqrt(1+2p)/sqrt(n)        (relative error O(1/n))
    """
    n = 10**6
    t = build_coeff_table("positive", 0.1, n)
    r = coeff_ratio(t, n)
    assert abs(r * math.sqrt(n / 0.8) - 1.0) < 1e-3
    t = build_coeff_table("negative", 0.5, n)
    r = coeff_ratio(t, n)
    assert abs(r * math.sqrt(n / 2.0) - 1.0) < 1e-4
    t = build_coeff_table("positive", 0.5, n)
    r = coeff_ratio(t, n)
    assert abs(r * math.sqrt(n * math.log(n)) - 1.0) < 0.05


def test_ratio_vectorized_and_range_checked():
    t = build_coeff_table("positive", 0.25, 100)
    ns = np.array([1, 10, 100])
    rs = coeff_ratio(t, ns)
    assert rs.shape == (3,)
    assert rs[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        coeff_ratio(t, 101)
    with pytest.raises(ValueError):
        coeff_ratio(t, 0)


def test_table_validation():
    with pytest.raises(ValueError):
        build_coeff_table("sideways", 0.2, 10)
    with pytest.raises(ValueError):
        build_coeff_table("positive", 1.0, 10)
    with pytest.raises(ValueError):
        build_coeff_table("positive", -0.1, 10)
    with pytest.raises(ValueError):
        build_coeff_table("positive", 0.2, 0)


def test_lil_constant_reference_points():
    assert lil_constant(0.0, 1.0) == pytest.approx(1.0 / math.sqrt(3.0), rel=1e-14)
    assert lil_constant(0.5, 0.0) == pytest.approx(2.0 / 3.0, rel=1e-14)
    assert lil_constant(0.25, 0.5) == pytest.approx(0.6172133998483676, rel=1e-12)


@pytest.mark.parametrize(
    "rho1,rho2",
    [(0.0, 1.0), (0.5, 0.75), (0.25, 0.5), (-0.25, 1.5), (1.0, 0.0)],
)
def test_variance_limit_against_quadrature(rho1, rho2):
    want = brownian_average_variance_quad(rho1, rho2)
    assert variance_limit(rho1, rho2) == pytest.approx(want, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(rho1=st.floats(-0.9, 2.0), rho2=st.floats(0.0, 2.0))
def test_lil_constant_squares_to_variance_limit(rho1, rho2):
    assert lil_constant(rho1, rho2) ** 2 == pytest.approx(
        variance_limit(rho1, rho2), rel=1e-12
    )


def test_lil_constant_domain():
    with pytest.raises(ValueError):
        lil_constant(-1.0, 0.5)
    with pytest.raises(ValueError):
        variance_limit(0.0, -0.1)


def test_com_constants_reference_points():
    assert com_lil_constant("hat_subcritical", 0.25, 1.0) == pytest.approx(
        0.8728715609439696, rel=1e-12
    )
    assert com_lil_constant("check", 0.5, 1.0) == pytest.approx(
        0.3651483716701107, rel=1e-12
    )
    assert com_lil_constant("hat_critical", 0.5, 1.0) == pytest.approx(2.0 / 3.0)
    assert erw_lil_constant(0.625) == pytest.approx(0.8728715609439696, rel=1e-12)


@settings(max_examples=80, deadline=None)
@given(q=st.floats(0.01, 0.749))
def test_erw_constant_matches_mapped_walk(q):
    # q >= 1/2 maps to positive mode with p = 2q-1, q < 1/2 to negative
    # mode with p = 1-2q; Rademacher steps have unit variance either way.
    if q >= 0.5:
        want = com_lil_constant("hat_subcritical", 2.0 * q - 1.0, 1.0)
    else:
        want = com_lil_constant("check", 1.0 - 2.0 * q, 1.0)
    assert erw_lil_constant(q) == pytest.approx(want, rel=1e-12)


def test_com_constant_domain():
    with pytest.raises(ValueError):
        com_lil_constant("hat_subcritical", 0.5, 1.0)
    with pytest.raises(ValueError):
        com_lil_constant("hat_critical", 0.4, 1.0)
    with pytest.raises(ValueError):
        com_lil_constant("check", 0.2, 0.0)
    with pytest.raises(ValueError):
        com_lil_constant("elsewhere", 0.2, 1.0)
    with pytest.raises(ValueError):
        erw_lil_constant(0.75)
    with pytest.raises(ValueError):
        erw_lil_constant(0.0)


SCHEDULES = [
    NormalizationSchedule("hat_subcritical", 0.25, 1.0),
    NormalizationSchedule("hat_subcritical", 0.0, 2.0),
    NormalizationSchedule("hat_critical", 0.5, 1.0),
    NormalizationSchedule("check", 0.5, 0.75),
]


@pytest.mark.parametrize("sched", SCHEDULES, ids=lambda s: f"{s.kind}-p{s.p}")
def test_schedule_clock_increases_and_matches_variance(sched):
    n = np.arange(2, 5000)
    b = sched.b_n(n)
    assert np.all(np.diff(b) > 0)
    assert np.all(b[0] > 0)
    # sigma_n^2 and b_n differ by the de-biasing factor n^{2p} (n^{-2p} in
    # the negative kind).
    expo = 2.0 * sched.p if sched.kind != "check" else -2.0 * sched.p
    assert np.allclose(sched.sigma_n2(n), n**expo * b, rtol=1e-12)


@pytest.mark.parametrize("sched", SCHEDULES, ids=lambda s: f"{s.kind}-p{s.p}")
def test_schedule_clock_increments_become_negligible(sched):
    # The almost sure CLT machinery needs (b_{n+1}-b_n) loglog(b_n) / b_n -> 0.
    n = 10**6
    b0, b1 = sched.b_n(n), sched.b_n(n + 1)
    assert (b1 - b0) * loglog(b0) / b0 < 1e-3


def test_schedule_weights_and_normalizers():
    sub = NormalizationSchedule("hat_subcritical", 0.25, 1.0)
    assert sub.weight(7) == pytest.approx(1.0 / 7.0)
    assert sub.log_normalizer(100.0) == pytest.approx(math.log(100.0))
    crit = NormalizationSchedule("hat_critical", 0.5, 1.0)
    assert crit.weight(1) == 0.0
    assert crit.weight(2) == pytest.approx(1.0 / (2.0 * math.log(2.0)))
    ks = crit.weight(np.array([1, 2, 3]))
    assert ks[0] == 0.0 and ks[2] == pytest.approx(1.0 / (3.0 * math.log(3.0)))
    assert crit.log_normalizer(10**5) == pytest.approx(math.log(math.log(10**5)))


def test_schedule_validation():
    with pytest.raises(ValueError):
        NormalizationSchedule("hat_subcritical", 0.5, 1.0)
    with pytest.raises(ValueError):
        NormalizationSchedule("hat_critical", 0.25, 1.0)
    with pytest.raises(ValueError):
        NormalizationSchedule("check", 1.0, 1.0)
    with pytest.raises(ValueError):
        NormalizationSchedule("hat_subcritical", 0.25, 0.0)
    with pytest.raises(ValueError):
        NormalizationSchedule("diagonal", 0.25, 1.0)


def test_loglog_guard():
    assert loglog(0.0) == pytest.approx(1.0, abs=1e-12)
    assert loglog(math.exp(math.e)) == pytest.approx(1.0, abs=1e-12)
    assert loglog(1e10) == pytest.approx(math.log(math.log(1e10)))
    xs = loglog(np.array([0.0, 1.0, 1e10]))
    assert xs[0] == pytest.approx(1.0, abs=1e-12)
    assert xs[1] == pytest.approx(1.0, abs=1e-12)
