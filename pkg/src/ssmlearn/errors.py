"""Exception types shared across the package.

The CLI maps these onto exit codes: config/schema problems exit with 2,
data problems with 3, and numerical failures with 4.
"""


class SsmLearnError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SsmLearnError, ValueError):
    """Array dimensions are inconsistent with the model setup."""


class CovarianceError(SsmLearnError, ValueError):
    """A covariance or scale matrix is not symmetric positive definite."""


class ParameterError(SsmLearnError, ValueError):
    """A distribution or algorithm parameter is out of its valid range."""


class WeightError(SsmLearnError, ValueError):
    """Invalid categorical weights (NaN, negative, or all zero)."""


class NumericalError(SsmLearnError, RuntimeError):
    """Numerical conditioning was lost beyond the jitter tolerance."""


class DegeneracyError(NumericalError):
    """All particle weights underflowed to zero at some time step."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"all particle weights are zero at t={t}")


class PropagationError(NumericalError):
    """A particle state became NaN during propagation."""


class ConfigError(SsmLearnError, ValueError):
    """A run configuration violates the schema; ``path`` locates the field."""

    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = "/".join(str(p) for p in self.path) or "<root>"
        super().__init__(f"{where}: {message}")


class DataError(SsmLearnError, ValueError):
    """A data file is malformed or inconsistent with the configuration."""
