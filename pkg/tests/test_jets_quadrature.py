import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parisian.jets import Jet, jexp, jsqrt
from parisian.quadrature import QuadratureSpec, batched_integral, gauss_legendre_panels, integrate


@given(st.floats(-2, 2), st.integers(1, 8))
def test_exp_jet_matches_taylor_series(x0, order):
    j = jexp(Jet.variable(x0, order))
    expect = [math.exp(x0) / math.factorial(k) for k in range(order + 1)]
    np.testing.assert_allclose(np.ravel(j.coeffs), expect, rtol=1e-13)


def test_sqrt_jet_squares_back():
    z = Jet.variable(2.3, 6) * 3.0 + 1.0
    back = jsqrt(z) * jsqrt(z)
    np.testing.assert_allclose(np.ravel(back.coeffs), np.ravel(z.coeffs), atol=1e-13)


def test_jet_quotient_rule():
    x = Jet.variable(0.7, 5)
    q = jexp(x) / (x + 1.0)
    # d/dx e^x/(x+1) = x e^x/(x+1)^2
    assert np.ravel(q.coeffs)[1] == pytest.approx(0.7 * math.exp(0.7) / 1.7**2, rel=1e-13)


def test_gauss_kronrod_smooth_and_kinked():
    val, err = integrate(lambda x: np.exp(-x) * np.cos(3 * x), 0.0, 40.0)
    assert val == pytest.approx(0.1, abs=1e-9)
    assert err < 1e-8
    val, _ = integrate(lambda x: np.abs(x - 0.3), 0.0, 1.0, points=[0.3])
    assert val == pytest.approx(0.29, abs=1e-12)


def test_gauss_kronrod_respects_tighter_tolerances():
    spec = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-12)
    val, _ = integrate(lambda x: np.sqrt(x), 0.0, 1.0, spec)
    assert val == pytest.approx(2 / 3, abs=1e-11)


def test_gauss_legendre_panels_integrate_polynomials():
    z, w = gauss_legendre_panels(np.array([0.0, 0.5, 2.0]), n=10)
    assert np.sum(w * z**7) == pytest.approx(2.0**8 / 8, rel=1e-13)


def test_batched_integral_rows_are_independent():
    lo = np.array([0.0, 1.0, -1.0])
    hi = np.array([1.0, 3.0, 1.0])
    rates = np.array([1.0, 2.0, 0.5])
    got = batched_integral(lambda z, i: np.exp(-rates[i] * z), lo, hi)
    expect = (np.exp(-rates * lo) - np.exp(-rates * hi)) / rates
    np.testing.assert_allclose(got, expect, rtol=1e-10)


def test_quadrature_spec_validates():
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=-1.0)
