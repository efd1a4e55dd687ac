"""Exception hierarchy shared across the package.

CLI exit-code mapping: ConfigError -> 2, InputError / OS-level I/O -> 3,
NumericError -> 4.
"""


class DualpaintError(Exception):
    """Base class for all package errors."""


class ConfigError(DualpaintError):
    """Invalid configuration value, unknown config key, or bad override."""


class InputError(DualpaintError):
    """Malformed or incompatible input data (shapes, ranges, files)."""


class CheckpointError(DualpaintError):
    """Checkpoint missing, corrupt, or version-incompatible."""


class NumericError(DualpaintError):
    """Non-finite values encountered where finite math is required."""
