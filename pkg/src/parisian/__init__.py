"""Parisian ruin probabilities and transforms for Cramer-Lundberg reserves with
deficit-dependent random delays, plus an exact Monte Carlo simulator."""

from .analytics import ParisianProblem
from .errors import (
    CapabilityError,
    ConfigError,
    DomainError,
    InternalConsistencyError,
    ModelInvalidError,
    ParisianError,
    SimulationAborted,
)
from .kernels import DeterministicDelay, PiecewiseErlangMixture, PiecewiseExponential
from .model import Deterministic, ErlangMixture, Exponential, RiskModel
from .quadrature import QuadratureSpec
from .scale import ScaleEvaluator
from .simulation import SimConfig, simulate_first_passage, simulate_joint_lt, simulate_marginal, simulate_ruin

__version__ = "0.1.0"

__all__ = [
    "ParisianProblem",
    "RiskModel",
    "Exponential",
    "ErlangMixture",
    "Deterministic",
    "PiecewiseExponential",
    "PiecewiseErlangMixture",
    "DeterministicDelay",
    "ScaleEvaluator",
    "QuadratureSpec",
    "SimConfig",
    "simulate_ruin",
    "simulate_joint_lt",
    "simulate_first_passage",
    "simulate_marginal",
    "ParisianError",
    "DomainError",
    "ModelInvalidError",
    "CapabilityError",
    "InternalConsistencyError",
    "SimulationAborted",
    "ConfigError",
]
