"""Exception hierarchy shared by all modules.

Numeric failures and configuration failures are kept apart so the CLI can map
them to distinct exit codes.
"""


class RnfgeoError(Exception):
    """Base class for every error raised by this package."""


class DomainError(RnfgeoError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(RnfgeoError, ArithmeticError):
    """A numerical procedure failed to converge or produced an unusable result."""


class ClassificationError(NumericError):
    """A kernel cannot be assigned to a class (boundary CRI, wrong class for the request)."""


class RangeError(NumericError):
    """A quantity is too large or too ill-conditioned to compute reliably."""


class SpectrumError(NumericError):
    """A power spectrum violates non-negativity beyond the clamp tolerance."""


class ConfigError(RnfgeoError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
