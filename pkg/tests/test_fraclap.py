import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from halfwave.fraclap import (
    QuadratureError,
    RadialProfile,
    cordoba_check,
    cross_validate,
    fraclap_quadrature,
    fraclap_spectral,
    normalization_constant,
    validate_normalization,
)
from halfwave.grid import GridSpec, ScalarField
from halfwave.specfun import FracIdentityQuery, frac_power_at_origin


def lorentz_half_laplacian(x):
    # inverse cosine transform of |xi| * pi exp(-|xi|) in closed form
    return (1.0 - x * x) / (1.0 + x * x) ** 2


@pytest.mark.parametrize("x", [0.0, 0.7, 3.0])
def test_lorentz_closed_form_against_mpmath(x):
    val = mpmath.quad(lambda k: k * mpmath.exp(-k) * mpmath.cos(k * x), mpmath.linspace(0, 60, 31) + [mpmath.inf])
    assert float(val) == pytest.approx(lorentz_half_laplacian(x), rel=1e-12, abs=1e-15)


@given(st.floats(min_value=-200.0, max_value=200.0))
def test_quadrature_lorentzian_off_origin(x):
    val = fraclap_quadrature(RadialProfile(2.0), [x], 0.5, rtol=1e-8)
    assert val == pytest.approx(lorentz_half_laplacian(x), rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("sigma", [0.25, 0.5, 0.75])
def test_quadrature_origin_identity(n, sigma):
    for q in (n + 1.0, n + 2.0, n + 3.0):
        exact = frac_power_at_origin(FracIdentityQuery(n, sigma, q))
        assert fraclap_quadrature(RadialProfile(q), np.zeros(n), sigma) == pytest.approx(exact, rel=1e-6)


def test_shifted_profile_origin_scaling():
    prof = RadialProfile(3.0, t=2.0)
    val = fraclap_quadrature(prof, [0.0], 0.5, scale=prof.width)
    assert val == pytest.approx(prof.exact_at_origin(1, 0.5), rel=1e-6)


@pytest.mark.parametrize("n", [1, 2])
def test_eta_profile_vanishes_at_origin(n):
    prof = RadialProfile.eta(n)
    assert prof.exact_at_origin(n, 0.5) == pytest.approx(0.0, abs=1e-14)
    assert abs(fraclap_quadrature(prof, np.zeros(n), 0.5, atol=1e-9)) <= 1e-6


def test_normalization_constant_half():
    assert normalization_constant(1, 0.5) == pytest.approx(1.0 / math.pi, rel=1e-14)
    assert normalization_constant(3, 0.5) == pytest.approx(1.0 / math.pi**2, rel=1e-14)


@pytest.mark.parametrize("n,sigma", [(1, 0.5), (2, 0.25)])
def test_validate_normalization(n, sigma):
    assert validate_normalization(n, sigma) < 1e-6


def test_quadrature_of_constant_is_zero():
    assert fraclap_quadrature(lambda p: np.ones(len(p)), [0.3, -1.0], 0.5) == pytest.approx(0.0, abs=1e-10)


@given(st.floats(min_value=-5.0, max_value=5.0), st.floats(min_value=-5.0, max_value=5.0))
def test_quadrature_translation_invariant(x, a):
    f = RadialProfile(2.0)
    shifted = fraclap_quadrature(lambda p: f(p - a), [x + a], 0.5, breakpoints=(abs(x),))
    assert shifted == pytest.approx(fraclap_quadrature(f, [x], 0.5), rel=1e-5, abs=1e-8)


def test_quadrature_error_is_raised():
    with pytest.raises(QuadratureError) as info:
        fraclap_quadrature(RadialProfile(2.0), [0.0], 0.5, rtol=1e-17, atol=0.0)
    assert math.isfinite(info.value.value)


@pytest.mark.parametrize("sigma", [0.0, 1.0, -0.5, 1.5])
def test_quadrature_sigma_domain(sigma):
    with pytest.raises(ValueError):
        fraclap_quadrature(RadialProfile(2.0), [0.0], sigma)


@pytest.mark.parametrize("s", [0.5, 1.0, 1.5, 2.0])
def test_spectral_plane_wave_eigenfunction(s):
    g = GridSpec(1, math.pi, 64)
    k = 5.0
    f = ScalarField(g, np.cos(k * g.axis))
    out = fraclap_spectral(f, s).values.real
    assert np.allclose(out, k**s * np.cos(k * g.axis), atol=1e-11)


def test_spectral_s2_is_minus_laplacian():
    g = GridSpec(2, 12.0, 128)
    r2 = g.radius_squared()
    out = fraclap_spectral(ScalarField(g, np.exp(-r2)), 2.0).values.real
    assert np.allclose(out, (4.0 - 4.0 * r2) * np.exp(-r2), atol=1e-10)


def test_spectral_complex_matches_real_path():
    g = GridSpec(1, 10.0, 128)
    u = np.exp(-g.axis**2)
    a = fraclap_spectral(ScalarField(g, u), 1.0).values
    b = fraclap_spectral(ScalarField(g, (1.0 + 2.0j) * u), 1.0).values
    assert np.allclose(b, (1.0 + 2.0j) * a, atol=1e-13)


def test_spectral_rejects_bad_order():
    g = GridSpec(1, 1.0, 8)
    with pytest.raises(ValueError):
        fraclap_spectral(ScalarField(g, np.zeros(8)), 2.5)


@given(
    st.floats(min_value=-3, max_value=3),
    st.floats(min_value=-3, max_value=3),
    st.floats(min_value=0.1, max_value=2.0),
)
def test_spectral_linear(a, b, s):
    g = GridSpec(1, 10.0, 64)
    f = np.exp(-g.axis**2)
    h = np.exp(-((g.axis - 1.0) ** 2))
    lhs = fraclap_spectral(ScalarField(g, a * f + b * h), s).values
    rhs = a * fraclap_spectral(ScalarField(g, f), s).values + b * fraclap_spectral(ScalarField(g, h), s).values
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_cross_validate_agrees_for_fast_decay():
    rep = cross_validate(RadialProfile(4.0), [[0.0], [1.0], [3.0]], 0.5, GridSpec(1, 100.0, 2048))
    assert not rep.flagged
    assert rep.max_diff < 5e-3


def test_spectral_converges_with_domain_size():
    prof = RadialProfile(2.0)
    errs = []
    for L in (50.0, 100.0, 200.0):
        g = GridSpec(1, L, int(2 ** math.ceil(math.log2(2 * L / 0.1))))
        v = fraclap_spectral(prof.sample(g), 1.0).values[g.N // 2].real
        errs.append(abs(v - 1.0))
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 5e-3


@pytest.mark.parametrize("s", [0.5, 1.0])
def test_cordoba_holds_for_gaussian_and_eta(s):
    g = GridSpec(1, 40.0, 1024)
    for prof in (np.exp(-g.axis**2), RadialProfile.eta(1).radial(g.axis**2)):
        v = cordoba_check(ScalarField(g, prof), s)
        assert v.passed
        assert v.details["min_gap"] >= -1e-8


def test_cordoba_rejects_negative_field():
    g = GridSpec(1, 5.0, 32)
    with pytest.raises(ValueError):
        cordoba_check(ScalarField(g, -np.ones(32)), 1.0)


def test_profile_validation():
    with pytest.raises(ValueError):
        RadialProfile(0.0)
    with pytest.raises(ValueError):
        RadialProfile(2.0, t=-1.0)
