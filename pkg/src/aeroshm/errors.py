"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes (see cli.py): configuration
problems exit 2, data problems exit 3, numeric failures exit 4.
"""


class AeroshmError(Exception):
    """Base class for all package errors."""


class ConfigError(AeroshmError):
    """Invalid configuration, arguments, or experiment setup."""


class DataError(AeroshmError):
    """Malformed, missing, or inconsistent input data."""


class ShapeError(DataError):
    """Array shape does not match what an operation requires."""


class NumericError(AeroshmError):
    """Non-finite value (NaN/Inf) or unstable numerical computation."""
