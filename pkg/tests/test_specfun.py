import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from halfwave.specfun import (
    FracIdentityQuery,
    c0,
    c0_double_factorial,
    double_factorial,
    frac_power_at_origin,
    gamma,
    half_ratio,
)

mpmath.mp.dps = 30

# mpmath, 30 digits
GAMMA_VALUES = [
    (0.1, 9.5135076986687312858),
    (0.5, 1.7724538509055160273),
    (1.5, 0.88622692545275801365),
    (2.5, 1.3293403881791370205),
    (7.25, 1155.3810139199896872),
    (33.3, 7.4875775965226323274e35),
    (100.5, 9.3209631040827166083e156),
    (170.5, 5.5620924145599996107e305),
]

C0_VALUES = {
    1: 0.78539816339744830962,
    2: 0.8488263631567751241,
    3: 0.88357293382212934832,
    4: 0.90541478736722679904,
    5: 0.92038847273138473783,
    6: 0.93128378129200470758,
    7: 0.9395632325799552532,
    8: 0.94606606353473494104,
    9: 0.95130777298720469387,
    10: 0.95562228639872216267,
}

# closed form at the origin, mpmath; the n = 1 entries were also confirmed by
# direct mpmath quadrature of the singular integral
ORIGIN_VALUES = {
    (1, 0.25, 2): 0.88622692545275801365,
    (1, 0.25, 3): 1.0139673601009270935,
    (1, 0.25, 4): 1.1077836568159475171,
    (1, 0.5, 2): 1.0,
    (1, 0.5, 3): 1.2732395447351626862,
    (1, 0.5, 4): 1.5,
    (1, 0.75, 2): 1.3293403881791370205,
    (1, 0.75, 3): 1.8491719494928993077,
    (1, 0.75, 4): 2.3263456793134897858,
    (2, 0.25, 3): 1.3293403881791370205,
    (2, 0.25, 4): 1.4523362529378021633,
    (2, 0.25, 5): 1.5508971195423265239,
    (2, 0.5, 3): 2.0,
    (2, 0.5, 4): 2.3561944901923449288,
    (2, 0.5, 5): 2.6666666666666666667,
    (2, 0.75, 3): 3.3233509704478425512,
    (2, 0.75, 4): 4.1809325374331930473,
    (2, 0.75, 5): 4.9850264556717638268,
}


@pytest.mark.parametrize("x, expected", GAMMA_VALUES)
def test_gamma_frozen_values(x, expected):
    assert gamma(x) == pytest.approx(expected, rel=1e-13)


def test_gamma_small_integers_exact():
    for k in range(1, 20):
        assert gamma(k) == pytest.approx(math.factorial(k - 1), rel=1e-14)


@given(st.floats(min_value=1e-3, max_value=170.0))
def test_gamma_matches_mpmath(x):
    assert gamma(x) == pytest.approx(float(mpmath.gamma(x)), rel=5e-13)


@given(st.floats(min_value=1e-2, max_value=160.0))
def test_gamma_recurrence(x):
    assert gamma(x + 1.0) == pytest.approx(x * gamma(x), rel=1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0, -0.5, float("nan"), float("inf")])
def test_gamma_rejects_nonpositive(bad):
    with pytest.raises(ValueError):
        gamma(bad)


def test_gamma_overflow_raises():
    with pytest.raises(OverflowError):
        gamma(172.0)


def test_double_factorial_small():
    assert [double_factorial(k) for k in range(8)] == [1, 1, 2, 3, 8, 15, 48, 105]


def test_double_factorial_overflow_and_domain():
    with pytest.raises(OverflowError):
        double_factorial(400)
    with pytest.raises(ValueError):
        double_factorial(-1)
    with pytest.raises(ValueError):
        double_factorial(2.5)


@pytest.mark.parametrize("n", range(1, 11))
def test_c0_both_forms_match_oracle(n):
    assert c0(n) == pytest.approx(C0_VALUES[n], rel=1e-13)
    assert c0_double_factorial(n) == pytest.approx(C0_VALUES[n], rel=1e-13)


def test_c0_special_values():
    assert abs(c0(1) - math.pi / 4) < 1e-15
    assert abs(c0(2) - 8 / (3 * math.pi)) < 1e-15


def test_c0_increases_towards_one():
    vals = [c0(n) for n in range(1, 40)]
    assert all(0 < v < 1 for v in vals)
    assert all(a < b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("bad", [0, -3, 1.5])
def test_c0_domain(bad):
    with pytest.raises(ValueError):
        c0(bad)
    with pytest.raises(ValueError):
        c0_double_factorial(bad)


@given(st.floats(min_value=0.05, max_value=50.0), st.floats(min_value=0.05, max_value=50.0))
def test_half_ratio_increasing(a, b):
    lo, hi = sorted((a, b))
    if hi - lo > 1e-6:
        assert half_ratio(lo) < half_ratio(hi)


@pytest.mark.parametrize("key", sorted(ORIGIN_VALUES))
def test_origin_identity_frozen(key):
    n, s, q = key
    assert frac_power_at_origin(FracIdentityQuery(n, s, q)) == pytest.approx(ORIGIN_VALUES[key], rel=1e-13)


@given(
    st.integers(min_value=1, max_value=3),
    st.floats(min_value=0.01, max_value=0.99),
    st.floats(min_value=0.1, max_value=20.0),
)
def test_origin_identity_matches_mpmath(n, s, dq):
    q = n + dq
    m = mpmath.mpf
    exact = 4 ** m(s) * mpmath.gamma(m(s) + m(n) / 2) * mpmath.gamma(m(s) + m(q) / 2)
    exact /= mpmath.gamma(m(n) / 2) * mpmath.gamma(m(q) / 2)
    assert frac_power_at_origin(FracIdentityQuery(n, s, q)) == pytest.approx(float(exact), rel=1e-12)


@pytest.mark.parametrize("args", [(1, 0.5, 1.0), (2, 0.5, 1.5), (1, 0.0, 3.0), (1, 1.0, 3.0), (0, 0.5, 3.0)])
def test_query_validation(args):
    with pytest.raises(ValueError):
        FracIdentityQuery(*args)
