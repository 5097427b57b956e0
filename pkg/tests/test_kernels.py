import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from parisian import DeterministicDelay, PiecewiseErlangMixture, PiecewiseExponential
from parisian.errors import DomainError

INF = float("inf")


def kernels():
    return [
        PiecewiseExponential.constant(1.0),
        PiecewiseExponential((-2.0, -0.5), (0.3, 1.0, 4.0)),
        PiecewiseErlangMixture((-1.0,), (((0.4, 1, 0.5), (0.6, 3, 2.0)), ((0.3, 1, INF), (0.7, 2, 1.5)))),
        PiecewiseErlangMixture((), (((0.5, 4, 3.0), (0.5, 2, 0.7)),)),
    ]


@pytest.mark.parametrize("kernel", kernels())
def test_quantile_is_generalised_inverse(kernel):
    xs = np.linspace(-4.0, -0.01, 100)
    ts = np.linspace(0.0, 8.0, 100)
    ys = np.linspace(0.005, 0.995, 100)
    for x in xs[::9]:
        cdf = kernel.cdf(x, ts)
        q = kernel.quantile(x, ys)
        for t, F in zip(ts, cdf):
            below = ys <= F - 1e-10
            above = ys > F + 1e-10
            assert np.all(q[below] <= t + 1e-9 * max(t, 1.0))
            assert np.all(q[above] > t - 1e-9 * max(t, 1.0))


@pytest.mark.parametrize("kernel", kernels()[:2] + kernels()[3:])
def test_pdf_integrates_to_cdf(kernel):
    for x in (-3.0, -0.7):
        val, _ = integrate.quad(lambda t: kernel.pdf(x, t), 0.0, 2.5)
        assert val == pytest.approx(kernel.cdf(x, 2.5), abs=1e-10)


def test_immediate_component_is_an_atom_at_zero():
    k = kernels()[2]
    assert k.cdf(-0.5, 0.0) == pytest.approx(0.3)
    assert k.atoms(-0.5) == [(0.0, pytest.approx(0.3))]
    assert k.atoms(-2.0) == []
    assert not k.is_continuous
    assert k.quantile(-0.5, 0.2) == 0.0


def test_sample_equals_quantile():
    k = kernels()[2]
    u = np.linspace(0.01, 0.99, 33)
    np.testing.assert_array_equal(k.sample(-1.5, u), k.quantile(-1.5, u))


@pytest.mark.parametrize("kernel", kernels())
def test_inverse_transform_samples_follow_cdf(kernel, rng):
    from scipy import stats

    x = -1.3
    u = rng.uniform(size=200000)
    samples = kernel.sample(x, u)
    grid = np.linspace(0.0, 10.0, 400)
    ecdf = np.searchsorted(np.sort(samples), grid, side="right") / samples.size
    assert np.max(np.abs(ecdf - kernel.cdf(x, grid))) < 4e-3


def test_deterministic_delay():
    k = DeterministicDelay(1.5)
    assert k.cdf(-1.0, 1.49) == 0.0 and k.cdf(-1.0, 1.5) == 1.0
    assert k.quantile(-1.0, 0.3) == 1.5
    assert k.atoms(-1.0) == [(1.5, 1.0)]


def test_exponential_cell_lookup():
    k = PiecewiseExponential((-2.0, -0.5), (0.3, 1.0, 4.0))
    assert k.tail(-3.0, 1.0) == pytest.approx(math.exp(-0.3))
    assert k.tail(-2.0, 1.0) == pytest.approx(math.exp(-0.3))
    assert k.tail(-1.0, 1.0) == pytest.approx(math.exp(-1.0))
    assert k.tail(-0.1, 1.0) == pytest.approx(math.exp(-4.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(-5.0, -1e-3), st.floats(1e-6, 1 - 1e-6))
def test_cdf_at_quantile_reaches_level(x, y):
    k = kernels()[3]
    t = k.quantile(x, y)
    assert k.cdf(x, t) >= y - 1e-9


def test_horizon_bounds_tail_mass():
    k = kernels()[1]
    for x in (-3.0, -1.0, -0.1):
        h = k.horizon(x, 1e-10)
        assert k.tail(x, h) <= 1.01e-10


def test_domain_errors():
    k = PiecewiseExponential.constant(1.0)
    with pytest.raises(DomainError):
        k.cdf(0.5, 1.0)
    with pytest.raises(DomainError):
        k.quantile(-1.0, 1.5)
    with pytest.raises(DomainError):
        PiecewiseExponential((-1.0,), (1.0,))
    with pytest.raises(DomainError):
        PiecewiseExponential((), (-1.0,))
