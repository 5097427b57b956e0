"""Exception hierarchy shared by every module."""


class ParisianError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(ParisianError, ValueError):
    """An argument lies outside the domain of the requested function."""


class ModelInvalidError(ParisianError, ValueError):
    """The risk model violates the safety loading condition or has bad rates."""

    def __init__(self, message: str, mean: float | None = None):
        super().__init__(message)
        self.mean = mean


class CapabilityError(ParisianError, NotImplementedError):
    """The requested route is not available for this model or kernel."""


class InternalConsistencyError(ParisianError, RuntimeError):
    """A quantity that is provably bounded came out of range numerically."""


class SimulationAborted(ParisianError, RuntimeError):
    """Too many paths hit the per-path event guard."""


class ConfigError(ParisianError, ValueError):
    """A run configuration failed to parse or validate."""
