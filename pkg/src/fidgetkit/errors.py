"""Exception hierarchy mapped to CLI exit codes."""


class FidgetkitError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class ConfigError(FidgetkitError):
    """Invalid or inconsistent run configuration."""

    exit_code = 2


class DataError(FidgetkitError):
    """Malformed, missing, or inconsistent input data."""

    exit_code = 3


class ModelError(FidgetkitError):
    """Missing, incompatible, or untrained model."""

    exit_code = 4
