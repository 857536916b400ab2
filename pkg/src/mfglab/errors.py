"""Exception types shared across the package."""


class MfgLabError(Exception):
    """Base class for all package errors."""


class GridMismatchError(MfgLabError):
    """Two grid quantities do not live on the same discretization."""


class StepSizeError(MfgLabError):
    """A time step violates the stability bound of an explicit term."""


class ConfigError(MfgLabError):
    """A run configuration failed validation."""
