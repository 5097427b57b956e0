import numpy as np
import pytest

from parisian import (
    Deterministic,
    ErlangMixture,
    Exponential,
    ParisianProblem,
    PiecewiseErlangMixture,
    PiecewiseExponential,
    RiskModel,
)

INF = float("inf")

DEEP = ((0.4, 1, 0.5), (0.6, 3, 2.0))
SHALLOW = ((0.3, 1, INF), (0.7, 2, 1.5))


@pytest.fixture(scope="session")
def exp_model():
    return RiskModel(2.0, 1.0, Exponential(1.0))


@pytest.fixture(scope="session")
def unit_kernel():
    return PiecewiseExponential.constant(1.0)


@pytest.fixture(scope="session")
def base_problem(exp_model, unit_kernel):
    return ParisianProblem(exp_model, unit_kernel)


@pytest.fixture(scope="session")
def two_cell_kernel():
    return PiecewiseErlangMixture((-1.0,), (DEEP, SHALLOW))


@pytest.fixture(scope="session")
def mixture_model():
    # common-rate Erlang mixture, mean 0.8
    return RiskModel(2.0, 1.0, ErlangMixture((0.6, 0.4), (1, 2), (2.0, 2.0)))


@pytest.fixture(scope="session")
def atom_model():
    return RiskModel(1.5, 1.0, Deterministic(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
