import math

import pytest
from hypothesis import given, settings, strategies as st

from wsladder.bessel import MAX_ARG, MAX_ORDER, SERIES_LIMIT, _miller, _series, bessel_j
from wsladder.errors import InvalidArgument

# 40-digit reference values (mpmath.besselj), frozen.
REFERENCE = [
    (0, 1.0, 0.76519768655796655145),
    (1, 2.5, 0.49709410246427403801),
    (5, 7.3, 0.31370617089730907746),
    (2, 12.0, -0.084930494878604805352),
    (7, 12.5, -0.22517790045972311055),
    (0, 15.0, -0.014224472826780773234),
    (3, 30.0, 0.12921122875972498304),
    (10, 50.5, -0.10261116826834735055),
    (40, 99.0, 0.077065949431035167848),
    (150, 80.0, 5.9269632386706315003e-28),
]
J0_FIRST_ZERO = 2.404825557695772768


@pytest.mark.parametrize("n,x,ref", REFERENCE)
def test_reference_values(n, x, ref):
    assert abs(bessel_j(n, x) - ref) < 1e-12


def test_values_at_zero():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert bessel_j(-3, 0.0) == 0.0


def test_first_zero_of_j0_is_bracketed():
    assert bessel_j(0, 2.40) > 0 > bessel_j(0, 2.41)
    assert abs(bessel_j(0, J0_FIRST_ZERO)) < 1e-14


@given(st.integers(0, MAX_ORDER), st.floats(-MAX_ARG, MAX_ARG))
@settings(max_examples=80, deadline=None)
def test_negative_order_and_argument_symmetry(n, x):
    s = -1.0 if n % 2 else 1.0
    assert bessel_j(-n, x) == s * bessel_j(n, x)
    assert bessel_j(n, -x) == s * bessel_j(n, x)


@given(st.floats(0.5, 11.5))
@settings(max_examples=40, deadline=None)
def test_series_and_recurrence_agree_below_switch(x):
    m = _miller(x)
    for n in range(0, 40):
        assert abs(_series(n, x) - m[n]) < 1e-13


@given(st.floats(0.1, 90.0), st.integers(1, 150))
@settings(max_examples=60, deadline=None)
def test_three_term_recurrence(x, n):
    lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x)
    assert abs(lhs - 2 * n / x * bessel_j(n, x)) < 1e-11 * max(1.0, 2 * n / x)


@pytest.mark.parametrize("x", [0.3, 4.2, SERIES_LIMIT, 25.0, 77.0])
def test_square_sum_identity(x):
    tot = bessel_j(0, x) ** 2 + 2 * math.fsum(bessel_j(n, x) ** 2 for n in range(1, MAX_ORDER + 1))
    assert abs(tot - 1.0) < 1e-12


@pytest.mark.parametrize("n,x", [(201, 1.0), (-201, 1.0), (0, 100.5), (3, float("nan")), (2.5, 1.0)])
def test_outside_envelope_rejected(n, x):
    with pytest.raises(InvalidArgument):
        bessel_j(n, x)
