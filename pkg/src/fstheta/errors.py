"""Shared exception types."""


class ConfigurationError(ValueError):
    """A parameter lies outside its supported range."""
