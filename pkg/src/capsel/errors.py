"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration and validation problems
exit with 1, numerical failures with 2.
"""


class CapselError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CapselError):
    """Inconsistent layer specs or hyperparameters (caught at build time)."""


class ValidationError(CapselError):
    """Runtime data that violates a contract (shapes, finiteness, ranges)."""


class NumericalError(CapselError):
    """Non-finite values produced during computation."""

    def __init__(self, message: str, layer: str | None = None):
        super().__init__(message)
        self.layer = layer


class DegenerateCurveWarning(UserWarning):
    """All sensitivity scores equal; normalization and selection degenerate."""
