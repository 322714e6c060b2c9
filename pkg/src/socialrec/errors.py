"""Exception hierarchy shared across the package.

CLI exit codes: ConfigError -> 1, DataError/ShapeError -> 2, NumericalError -> 3.
"""


class SocialRecError(Exception):
    """Base class for all socialrec errors."""


class ConfigError(SocialRecError):
    """Invalid configuration value or combination."""


class DataError(SocialRecError):
    """Malformed or inconsistent input data."""


class ShapeError(SocialRecError):
    """Tensor dimensions do not match the declared contract."""


class NumericalError(SocialRecError):
    """Non-finite value encountered during optimization."""
