"""Exception types shared across the package."""


class BiasgridError(Exception):
    """Base class for all package errors."""


class ConfigError(BiasgridError):
    """Invalid configuration file, key, or value."""


class DataError(BiasgridError):
    """Invalid dataset, manifest, image file, or incompatible inputs."""


class NumericalError(BiasgridError):
    """Numerically degenerate input, e.g. a collapsed singular spectrum."""
