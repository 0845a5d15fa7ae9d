import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from gopa.numerics import (ErfBudget, FixedPoint, OutOfBranchError, erf_branch_bound, erf_series, erf_term_bound,
                           erf_trace, erfc_admits, erfc_error_bound, erfc_series, identity_constants,
                           inverse_erf_fast, inverse_erf_sample, stirling_min_terms, rdiv, sample_branch)


def rational_erf(x: Fraction, terms: int = 64) -> Fraction:
    """2/sqrt(pi) * sum (-1)^l x^(2l+1) / (l! (2l+1)), exact up to the sqrt(pi) constant."""
    acc = Fraction(0)
    p = x
    for l in range(terms):
        acc += (-1) ** l * p / (math.factorial(l) * (2 * l + 1))
        p *= x * x
    with mpmath.workprec(200):
        return acc * Fraction(str(mpmath.mpf(2) / mpmath.sqrt(mpmath.pi)))


B6 = ErfBudget.for_error(1e-6)


# -- rounding primitives --------------------------------------------------------

@given(st.integers(-10 ** 30, 10 ** 30), st.integers(1, 10 ** 12))
def test_rdiv_is_nearest_and_odd(a, b):
    q = rdiv(a, b)
    assert abs(Fraction(a, b) - q) <= Fraction(1, 2)
    assert rdiv(-a, b) == -q


def test_rdiv_ties_away_from_zero():
    assert rdiv(5, 2) == 3 and rdiv(-5, 2) == -3 and rdiv(4, 2) == 2


def test_rdiv_rejects_nonpositive_divisor():
    with pytest.raises(ValueError):
        rdiv(1, 0)


@given(st.integers(-2 ** 60, 2 ** 60), st.integers(-2 ** 60, 2 ** 60))
def test_fixed_point_addition_is_exact(a, b):
    s = Fraction(1, 1 << 40)
    x, y = FixedPoint(a, s), FixedPoint(b, s)
    assert (x + y).value == x.value + y.value
    assert (x - y).value == x.value - y.value
    assert (x * 7).value == 7 * x.value


@given(st.integers(-2 ** 50, 2 ** 50), st.integers(1, 2 ** 20))
def test_fixed_point_division_rounds_by_at_most_half_quantum(a, d):
    x = FixedPoint(a, Fraction(1, 1 << 40))
    assert abs((x / d).value - x.value / d) <= x.scale / 2


def test_fixed_point_decimal_round_trip():
    x = FixedPoint.from_value("0.1", Fraction(1, 1 << 20))
    assert FixedPoint.from_decimal(x.to_decimal(), x.scale) == x


def test_fixed_point_rejects_odd_scales():
    with pytest.raises(ValueError):
        FixedPoint(1, Fraction(1, 3))


def test_scales_must_match():
    with pytest.raises(ValueError):
        FixedPoint(1, Fraction(1, 2)) + FixedPoint(1, Fraction(1, 4))


# -- erf branch ---------------------------------------------------------------------

def test_erf_of_zero_is_zero():
    assert erf_series(FixedPoint(0, B6.psi), B6).mantissa == 0


def test_erf_of_one_against_rational_oracle():
    got = erf_series(FixedPoint.from_value(1, B6.psi), B6).value
    assert abs(got - rational_erf(Fraction(1))) <= Fraction(B6.B)
    assert abs(float(got) - 0.8427) < 1e-4


def test_erf_is_odd():
    x = FixedPoint.from_value("0.5", B6.psi)
    assert erf_series(-x, B6) == -erf_series(x, B6)


def test_erf_truncation_on_random_points():
    rng = np.random.default_rng(11)
    for x in rng.uniform(-B6.x_max, B6.x_max, 300):
        fx = FixedPoint.from_value(Fraction(float(x)), B6.psi)
        with mpmath.workdps(40):
            ref = mpmath.erf(mpmath.mpf(fx.value.numerator) / fx.value.denominator)
        assert abs(float(erf_series(fx, B6).value) - float(ref)) <= B6.B


def test_erf_outside_branch_raises():
    with pytest.raises(OutOfBranchError):
        erf_series(FixedPoint.from_value(B6.x_max + 0.1, B6.psi), B6)


@pytest.mark.parametrize("B", [1e-3, 1e-6, 2.0 ** -30])
def test_last_term_guard(B):
    b = ErfBudget.for_error(B)
    assert erf_term_bound(b.x_max, b.L) <= B / 2
    assert b.L >= stirling_min_terms(B)


def test_recurrence_rounding_within_budget():
    b = ErfBudget.for_error(1e-4)
    for x in (0.3, 1.0, 2.0, b.x_max * 0.95):
        xh = round(x * b.S)
        tr = erf_trace(xh, b.psi_bits, b.L)
        exact = Fraction(0)
        xf = Fraction(xh, b.S)
        for l in range(b.L):
            exact += (-1) ** l * xf ** (2 * l + 1) / (math.factorial(l) * (2 * l + 1))
        assert abs(Fraction(tr.total, b.S) - exact) <= Fraction(b.rounding_bound(x))


def test_budget_validation():
    with pytest.raises(ValueError):
        ErfBudget(B=1e-6, L=3, x_max=2.0, psi_bits=60)
    with pytest.raises(ValueError):
        ErfBudget(B=1e-6, L=80, x_max=erf_branch_bound(1e-6) + 1, psi_bits=60)
    with pytest.raises(ValueError):
        ErfBudget(B=2.0, L=80, x_max=1.0, psi_bits=60)


# -- erfc branch ----------------------------------------------------------------------

def test_erfc_branch_criterion():
    # sqrt(8)/(sqrt(pi)(2e)^4) is about 1.8e-3, so x=3 is not admitted at B=1e-6
    assert not erfc_admits(3.0, 1e-6)
    assert erfc_admits(3.0, 1e-2)
    assert erfc_admits(4.5, 1e-6)
    assert erfc_error_bound(3.0) == pytest.approx(math.sqrt(8) / (math.sqrt(math.pi) * (2 * math.e) ** 4))


@pytest.mark.parametrize("B,x", [(1e-2, 3.0), (1e-6, 4.5), (1e-6, 5.2)])
def test_erfc_plus_erf_is_one(B, x):
    b = ErfBudget.for_error(B)
    fx = FixedPoint.from_value(x, b.psi)
    with mpmath.workdps(40):
        e = float(mpmath.erf(x))
    assert abs(float(erfc_series(fx, b).value) + e - 1) <= 2 * B


def test_erfc_decreasing():
    b = ErfBudget.for_error(1e-6)
    vals = [erfc_series(FixedPoint.from_value(x, b.psi), b).value for x in (4.5, 5.0, 6.0)]
    assert vals[0] > vals[1] > vals[2]


def test_erfc_rejects_small_arguments():
    with pytest.raises(OutOfBranchError):
        erfc_series(FixedPoint.from_value(1.0, B6.psi), B6)


# -- inverse sampling --------------------------------------------------------------------

def test_midpoint_maps_to_zero():
    b = ErfBudget.for_sampling(1e-6, 1025)
    assert inverse_erf_sample(512, 1025, b).mantissa == 0


def test_quarter_point():
    b = ErfBudget.for_sampling(1e-6, 4)
    x = float(inverse_erf_sample(0, 4, b).value)
    with mpmath.workdps(30):
        ref = float(mpmath.sqrt(2) * mpmath.erfinv(-0.75))
    assert x == pytest.approx(ref, abs=1e-5)
    assert x == pytest.approx(-1.1503, abs=1e-4)


def test_inverse_map_is_odd_and_centred():
    M = 1024
    b = ErfBudget.for_sampling(1e-6, M)
    xs = [sample_branch(y, M, b)[0] for y in range(M)]
    assert all(xs[y] == -xs[M - 1 - y] for y in range(M))
    assert abs(sum(xs) / M / b.S) < 1e-6


def test_inverse_matches_float_quantiles():
    M = 2 ** 16
    b = ErfBudget.for_sampling(2.0 ** -20, M)
    ys = np.random.default_rng(5).integers(0, M, 200)
    fast = inverse_erf_fast(ys, M)
    for y, f in zip(ys.tolist(), fast.tolist()):
        assert float(inverse_erf_sample(y, M, b).value) == pytest.approx(f, abs=1e-4)


def test_identity_residual_within_tolerance():
    M = 2 ** 12
    b = ErfBudget.for_sampling(1e-4, M)
    ic = identity_constants(b, M)
    from gopa.numerics import _erf_residual

    for y in (0, 17, 1000, 2047, 3000, M - 1):
        x, br = sample_branch(y, M, b)
        if br == "erf":
            n = 2 * y + 1 - M
            assert abs(_erf_residual(abs(x), abs(n), M, b, ic)) < 1 << ic.tol_bits


def test_erfc_branch_used_in_tails():
    b = ErfBudget.for_error(1e-3, x_cap=3.6)
    M = 2 ** 20
    x, br = sample_branch(0, M, b, prefer_erfc=True)
    assert br == "erfc-" and x < 0
    x2, br2 = sample_branch(M - 1, M, b, prefer_erfc=True)
    assert br2 == "erfc+" and x2 == -x


def test_sample_branch_rejects_bad_input():
    with pytest.raises(ValueError):
        sample_branch(4, 4, ErfBudget.for_sampling(1e-3, 4))
