"""
Frostlab error types
"""


class FrostlabError(Exception):
    """Base class for every error raised by the lab"""


class PreconditionError(FrostlabError, ValueError):
    """An operation was called outside its domain; the message names the failing condition"""


class ConfigError(FrostlabError):
    """Malformed configuration, unknown experiment or unwritable output"""
