import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

import oracles
from conftest import DEEP, SHALLOW
from parisian import (
    DeterministicDelay,
    ErlangMixture,
    Exponential,
    ParisianProblem,
    PiecewiseErlangMixture,
    PiecewiseExponential,
    RiskModel,
)
from parisian.analytics import ROUTE_CASE1, ROUTE_CASE2, ROUTE_QUADRATURE
from parisian.errors import CapabilityError, DomainError

# frozen from the renewal oracle in oracles.py (40-digit mpmath)
RUIN_BASE = {0.0: 0.2928932188134524756, 1.0: 0.1776487172322800254, 2.5: 0.0839153121578754109}
RUIN_TWO_CELL = {0.0: 0.2994981363026561914, 1.5: 0.1414729021976442573}
JOINT_BASE = 0.0462158540317351907  # (u, b, v, w) = (1, 10, 0.5, 0.5)


def test_routes_are_selected_from_the_kernel(base_problem, exp_model, two_cell_kernel):
    assert base_problem.kernel_route == ROUTE_CASE1
    assert ParisianProblem(exp_model, two_cell_kernel).kernel_route == ROUTE_CASE2
    assert ParisianProblem(exp_model, DeterministicDelay(1.0)).kernel_route == ROUTE_QUADRATURE
    with pytest.raises(CapabilityError):
        ParisianProblem(exp_model, two_cell_kernel).resolve_route(ROUTE_CASE1)


@pytest.mark.parametrize("u", sorted(RUIN_BASE))
def test_ruin_probability_against_oracle(base_problem, u):
    assert base_problem.ruin_prob(u) == pytest.approx(RUIN_BASE[u], abs=1e-13)
    assert base_problem.ruin_prob_cl(u) == pytest.approx(RUIN_BASE[u], abs=1e-13)


def test_frozen_values_match_live_oracle():
    assert float(oracles.parisian_ruin_exp(2, 1, 1, 1.0, lambda y: ((1.0, 1, 1.0),))) == pytest.approx(
        RUIN_BASE[1.0], abs=1e-18
    )
    assert float(oracles.joint_lt_exp(2, 1, 1, 1, 1, 10, 0.5, 0.5)) == pytest.approx(JOINT_BASE, abs=1e-18)


def test_quadrature_route_agrees(base_problem):
    assert base_problem.ruin_prob(1.0, "quadrature") == pytest.approx(RUIN_BASE[1.0], abs=1e-8)


@pytest.mark.parametrize("u", sorted(RUIN_TWO_CELL))
def test_two_cell_erlang_kernel(exp_model, two_cell_kernel, u):
    p = ParisianProblem(exp_model, two_cell_kernel)
    assert p.ruin_prob(u) == pytest.approx(RUIN_TWO_CELL[u], abs=1e-12)


def test_memoryless_claims_make_ruin_proportional_to_classical(base_problem):
    us = np.array([0.0, 0.5, 2.0, 6.0])
    ratio = base_problem.ruin_prob(us) / base_problem.classical_ruin(us)
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)


def test_reductions(exp_model):
    immediate = ParisianProblem(exp_model, PiecewiseExponential((), (math.inf,)))
    us = np.array([0.0, 1.0, 4.0])
    np.testing.assert_allclose(immediate.ruin_prob(us), immediate.classical_ruin(us), atol=1e-12)
    patient = ParisianProblem(exp_model, PiecewiseExponential((), (1e-8,)))
    assert np.all(patient.ruin_prob(us) < 1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.05, 20.0), st.floats(0.0, 5.0))
def test_shorter_delays_mean_more_ruin(r1, r2, u):
    model = RiskModel(2.0, 1.0, Exponential(1.0))
    lo, hi = sorted((r1, r2))
    p_lo = ParisianProblem(model, PiecewiseExponential.constant(lo)).ruin_prob(u)
    p_hi = ParisianProblem(model, PiecewiseExponential.constant(hi)).ruin_prob(u)
    assert 0.0 <= p_lo <= p_hi + 1e-14
    assert p_hi <= ParisianProblem(model, PiecewiseExponential.constant(hi)).classical_ruin(u) + 1e-14


def test_phi_ell_against_finite_differences(base_problem, exp_model):
    xs = np.array([-0.3, -1.5, -4.0])
    r, h = 1.0, 1e-2

    def f(rr):
        return np.exp(exp_model.phi_inverse(rr) * xs)

    # Richardson-extrapolated central differences up to third order
    def deriv(k, hh):
        if k == 1:
            return (f(r + hh) - f(r - hh)) / (2 * hh)
        if k == 2:
            return (f(r + hh) - 2 * f(r) + f(r - hh)) / hh**2
        return (f(r + 2 * hh) - 2 * f(r + hh) + 2 * f(r - hh) - f(r - 2 * hh)) / (2 * hh**3)

    for k in (1, 2, 3):
        rich = (4 * deriv(k, h / 2) - deriv(k, h)) / 3
        expect = (-1) ** k * rich / math.factorial(k)
        np.testing.assert_allclose(base_problem.phi_ell(k, r, xs), expect, atol=1e-7)
    np.testing.assert_allclose(base_problem.phi_ell(0, r, xs), f(r), rtol=1e-14)
    with pytest.raises(CapabilityError):
        base_problem.phi_ell(17, r, xs)


def test_k_matches_oracle_and_quadrature(exp_model, two_cell_kernel):
    p = ParisianProblem(exp_model, two_cell_kernel)
    xs = np.linspace(-4.0, -0.01, 20)
    closed = p.k_fn(xs)
    quad = np.array([p.k_fn(x, "quadrature") for x in xs])
    np.testing.assert_allclose(closed, quad, atol=1e-6)
    for x in (-0.3, -2.0):
        cell = DEEP if x <= -1.0 else SHALLOW
        assert p.k_fn(x) == pytest.approx(float(oracles.escape(2, 1, 1, -x, cell)), abs=1e-12)


def test_first_deficit_density(base_problem):
    for u in (0.0, 0.7, 3.0):
        xs = np.linspace(-5.0, -0.01, 20)
        np.testing.assert_allclose(
            base_problem.first_deficit_density(u, xs, "general"), base_problem.first_deficit_density(u, xs), atol=1e-7
        )
        mass, _ = integrate.quad(lambda x: base_problem.first_deficit_density(u, x), -np.inf, 0.0, epsabs=1e-13)
        assert mass == pytest.approx(base_problem.classical_ruin(u), abs=1e-8)


def test_first_deficit_density_mixture_claims(mixture_model):
    p = ParisianProblem(mixture_model, PiecewiseExponential.constant(1.0))
    for u in (0.0, 1.5):
        mass, _ = integrate.quad(lambda x: float(p.first_deficit_density(u, x)), -np.inf, 0.0, epsabs=1e-12)
        assert mass == pytest.approx(float(p.classical_ruin(u)), abs=1e-7)
    with pytest.raises(CapabilityError):
        p.first_deficit_density(0.0, -1.0, "closed")


def test_excursion_transforms_are_consistent(exp_model, two_cell_kernel):
    p = ParisianProblem(exp_model, two_cell_kernel)
    xs = np.linspace(-3.0, -0.05, 9)
    # recovery before the delay ends, undiscounted, is K itself
    np.testing.assert_allclose(p.m2(0.0, xs), p.k_fn(xs), atol=1e-14)
    np.testing.assert_allclose(p.m1(0.0, 0.0, xs) + p.m2(0.0, xs), 1.0, atol=1e-12)
    for v, w in ((0.0, 0.0), (0.5, 0.5), (0.2, 1.7)):
        np.testing.assert_allclose(
            [p.m1(v, w, x, "quadrature") for x in xs[::2]], p.m1(v, w, xs[::2]), atol=1e-9
        )
        np.testing.assert_allclose(
            [p.m2(v, x, "quadrature") for x in xs[::2]], p.m2(v, xs[::2]), atol=1e-9
        )


def test_excursion_transform_near_removable_point(exp_model):
    # v + rate close to psi(w) exercises the re-centred expansion
    p = ParisianProblem(exp_model, PiecewiseErlangMixture((), (((1.0, 3, 1.0),),)))
    w = 1.0
    a = float(exp_model.cumulant(w))
    v = a - 1.0 + 1e-4
    xs = np.array([-0.4, -2.0])
    closed = p.m1(v, w, xs)
    quad = np.array([p.m1(v, w, x, "quadrature") for x in xs])
    np.testing.assert_allclose(closed, quad, atol=1e-9)


def test_joint_transform(base_problem):
    assert base_problem.joint_lt(1.0, 0.5, 0.5, 10.0) == pytest.approx(JOINT_BASE, abs=1e-12)
    assert base_problem.joint_lt(10.0, 0.5, 0.5, 10.0) == 0.0
    b = base_problem.default_b()
    assert base_problem.joint_lt(1.0, 0.0, 0.0, b) == pytest.approx(RUIN_BASE[1.0], abs=1e-3)
    for args in ((0, 3, 1.2, 0.3), (2, 4, 0.1, 2.0)):
        u, bb, v, w = args
        expect = float(oracles.joint_lt_exp(2, 1, 1, 1, u, bb, v, w))
        assert base_problem.joint_lt(u, v, w, bb) == pytest.approx(expect, abs=1e-12)


def test_joint_transform_quadrature_route(exp_model):
    p = ParisianProblem(exp_model, PiecewiseExponential.constant(0.4))
    expect = float(oracles.joint_lt_exp(2, 1, 1, 0.4, 1.0, 5.0, 0.3, 0.7))
    assert p.joint_lt(1.0, 0.3, 0.7, 5.0) == pytest.approx(expect, abs=1e-12)
    assert p.joint_lt(1.0, 0.3, 0.7, 5.0, "quadrature") == pytest.approx(expect, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(0.0, 2.0))
def test_joint_transform_monotone_in_discount(v1, v2, u):
    p = ParisianProblem(RiskModel(2.0, 1.0, Exponential(1.0)), PiecewiseExponential.constant(1.0))
    lo, hi = sorted((v1, v2))
    a, b = p.joint_lt(u, lo, 0.3, 8.0), p.joint_lt(u, hi, 0.3, 8.0)
    assert 0.0 <= b <= a + 1e-14
    assert a <= p.joint_lt(u, lo, 0.0, 8.0) + 1e-14


def test_default_truncation_level(base_problem, mixture_model):
    b = base_problem.default_b()
    assert b == pytest.approx(2.0 * math.log(0.5e6), rel=1e-12)
    assert base_problem.classical_ruin(b) == pytest.approx(1e-6, rel=1e-9)
    p = ParisianProblem(mixture_model, PiecewiseExponential.constant(1.0))
    assert float(p.classical_ruin(p.default_b())) == pytest.approx(1e-6, rel=1e-6)


def test_mixture_claims_routes_agree(mixture_model, two_cell_kernel):
    p = ParisianProblem(mixture_model, two_cell_kernel)
    assert p.ruin_prob(0.5, "quadrature") == pytest.approx(p.ruin_prob(0.5), abs=1e-7)
    with pytest.raises(CapabilityError):
        p.ruin_prob_cl(0.5)


def test_deterministic_claims(atom_model):
    p = ParisianProblem(atom_model, PiecewiseExponential.constant(1.0))
    closed = p.ruin_prob(0.5)
    assert 0.0 < closed < float(p.classical_ruin(0.5))
    assert p.ruin_prob(0.5, "quadrature") == pytest.approx(closed, abs=1e-7)


def test_distinct_rate_mixture_has_no_quadrature_route(two_cell_kernel):
    model = RiskModel(3.0, 1.0, ErlangMixture((0.5, 0.5), (1, 2), (1.0, 3.0)))
    p = ParisianProblem(model, two_cell_kernel)
    assert 0.0 < p.ruin_prob(0.0) < 1.0
    with pytest.raises(CapabilityError):
        p.ruin_prob(0.0, "quadrature")


def test_domain_errors(base_problem):
    with pytest.raises(DomainError):
        base_problem.ruin_prob(-1.0)
    with pytest.raises(DomainError):
        base_problem.k_fn(0.5)
    with pytest.raises(DomainError):
        base_problem.joint_lt(3.0, 0.0, 0.0, 2.0)
    with pytest.raises(DomainError):
        base_problem.m1(-0.1, 0.0, -1.0)
    with pytest.raises(DomainError):
        base_problem.resolve_route("sideways")


def test_joint_transform_heavy_discount(base_problem):
    expect = float(oracles.joint_lt_exp(2, 1, 1, 1, 1.0, 6.0, 100.0, 0.0))
    assert 0.0 < expect < 1e-4
    assert base_problem.joint_lt(1.0, 100.0, 0.0, 6.0) == pytest.approx(expect, rel=1e-9)
