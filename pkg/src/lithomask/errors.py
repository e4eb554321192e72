"""Exception and warning types shared across the package."""


class LithomaskError(Exception):
    """Base class for all package errors."""


class ConfigurationError(LithomaskError, ValueError):
    """Invalid or inconsistent configuration (bad parameters, spacing mismatch)."""


class GridMismatchError(ConfigurationError):
    """Two fields that must share a grid do not."""


class DomainError(LithomaskError, ValueError):
    """Input violates a mathematical precondition (negative scale, support violation)."""


class ResourceError(LithomaskError):
    """Requested computation exceeds the allowed size without explicit opt-in."""


class ConstructionFailedError(LithomaskError):
    """Kernel construction search exhausted its budget.

    Carries the best deviation achieved so callers can report it.
    """

    def __init__(self, message, best_deviation=None, best_params=None):
        super().__init__(message)
        self.best_deviation = best_deviation
        self.best_params = best_params


class TruncationWarning(UserWarning):
    """A sampled kernel loses non-negligible mass to domain truncation."""


class ThresholdRangeWarning(UserWarning):
    """Exposure threshold configured outside the well-behaved [1/3, 2/3] range."""
