"""Exception types shared across the package.

The CLI maps these onto process exit codes, so every failure raised from
library code should derive from one of them.
"""


class StreakError(Exception):
    """Base class for all package errors."""


class ShapeError(StreakError, ValueError):
    """Tensor extents do not conform to what an operation requires."""


class FormatError(StreakError, ValueError):
    """A file or text stream does not follow its declared format."""


class CorruptFileError(FormatError):
    """A binary file is truncated or fails its integrity check."""


class ConfigError(StreakError, ValueError):
    """A configuration file or option is missing or invalid."""


class NumericError(StreakError, ArithmeticError):
    """A computation produced NaN or infinity."""
