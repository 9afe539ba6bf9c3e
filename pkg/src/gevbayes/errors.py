"""Exception hierarchy shared across the package."""


class GevBayesError(Exception):
    """Base class for all package errors."""


class DomainError(GevBayesError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class EstimationError(GevBayesError, RuntimeError):
    """A point estimator could not produce a usable fit."""


class SamplerError(GevBayesError, RuntimeError):
    """The MCMC sampler failed irrecoverably mid-chain."""


class ChainInitError(SamplerError):
    """The chain could not be started from a valid state."""


class ParseError(GevBayesError, ValueError):
    """A data file violates its expected format.

    Attributes:
        line: 1-based line number of the offending record, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigError(GevBayesError, ValueError):
    """A run configuration is invalid."""


class SimulationError(GevBayesError, RuntimeError):
    """A simulation scenario failed (e.g. too many replication failures)."""
