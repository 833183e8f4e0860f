"""Exception types shared across the package."""


class FagcnError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(FagcnError):
    """Operand dimensions are inconsistent with the requested operation."""


class ConfigError(FagcnError):
    """Invalid configuration value or command argument."""


class DataError(FagcnError):
    """Input data is malformed or internally inconsistent."""


class NumericError(FagcnError):
    """A non-finite value appeared where a finite one is required."""
