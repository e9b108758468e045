"""Exception hierarchy shared across the library.

The CLI maps these onto process exit codes: configuration problems exit
with 2, data problems with 3, and numerical failures with 4.
"""


class CmowError(Exception):
    """Base class for all library errors."""


class StructuralError(CmowError):
    """Shape, dimension, or argument-contract violation."""


class ConfigError(CmowError):
    """Invalid or inconsistent configuration (bad vocab file, bad dims, ...)."""


class DataError(CmowError):
    """Malformed input data (corpus, task file, teacher records)."""


class NumericalError(CmowError):
    """Non-finite values or other numerical breakdown during computation."""
