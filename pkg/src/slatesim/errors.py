"""Shared exception types."""


class SlatesimError(Exception):
    """Base class for all slatesim errors."""


class ConfigError(SlatesimError):
    """A configuration value is invalid or a config key is unknown."""


class ValidationError(SlatesimError):
    """Input data (catalog file, instance file, episode log) failed validation."""


class ContractError(SlatesimError):
    """An API precondition was violated by the caller."""


class TrainingError(SlatesimError):
    """Training cannot proceed, e.g. no samples were collected."""
