"""Exception types shared across modules."""


class DomainError(ValueError):
    """Input outside the domain where a quantity is defined."""


class ConfigError(ValueError):
    """Inconsistent or invalid configuration."""


class BranchTrackingError(RuntimeError):
    """A mode could not be followed continuously in the membrane position."""

    def __init__(self, msg, indices=()):
        super().__init__(msg)
        self.indices = tuple(indices)


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, msg, achieved=None):
        super().__init__(msg)
        self.achieved = achieved


class DegeneracyError(ValueError):
    """Perturbative denominator below the configured floor."""


class NumericalError(RuntimeError):
    """Generic numerical failure (CLI exit code 3)."""
