"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An argument breaks a documented precondition."""


class ConfigurationError(ValueError):
    """A configuration file or option set is invalid."""


class NumericalFailureError(RuntimeError):
    """An iterative numerical procedure failed to produce a usable result."""


class SingularMatrixError(NumericalFailureError):
    """A matrix that must be invertible is numerically singular or indefinite."""
