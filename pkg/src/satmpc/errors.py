"""Exception types shared across the package."""


class SatmpcError(Exception):
    """Base class for package errors."""


class ConfigError(SatmpcError):
    """Invalid user input: bad dimensions, unknown keys, out-of-range values."""


class NumericalError(SatmpcError):
    """A numerical routine failed its accuracy contract.

    Carries the best available estimate in `best_estimate` when one exists.
    """

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate


class NotCertifiableError(SatmpcError):
    """Stability certification was requested for a system that admits none."""
