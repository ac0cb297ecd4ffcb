"""Exception hierarchy shared by the library and the CLI."""


class DoaError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(DoaError, ValueError):
    """Invalid geometry, source or scenario configuration."""


class InvalidFrequencyError(ConfigurationError):
    """A frequency index that is not part of the geometry was requested."""


class DomainError(DoaError, ValueError):
    """Input outside the mathematical domain of an operation."""


class DimensionError(DoaError, ValueError):
    """Array shapes do not match the lifting plan or geometry."""


class UnsupportedConfigurationError(ConfigurationError):
    """The requested formulation does not support this geometry."""


class ProblemConstructionError(DoaError, ValueError):
    """A conic problem violates its structural invariants."""


class NumericError(DoaError, ArithmeticError):
    """Non-finite values reached a numerical kernel."""


class SubspaceDimensionError(DoaError, ValueError):
    """Requested signal subspace leaves no noise subspace."""


class DegenerateSpectrumError(DoaError, RuntimeError):
    """The null spectrum has fewer local minima than requested sources.

    The minima that were found are kept on ``found`` so a caller can retry
    with a finer grid or accept a partial answer.
    """

    def __init__(self, message, found=None):
        super().__init__(message)
        self.found = found


class ScoringError(DoaError, ValueError):
    """Estimate and ground-truth lists cannot be paired."""
