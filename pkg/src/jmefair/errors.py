"""Exception types shared across the package.

Plain ``ValueError`` is used for local argument validation; the classes
here exist so the CLI can map failure categories to distinct exit codes.
"""


class ConfigError(ValueError):
    """Invalid study configuration (bad flag, missing key, bad combination)."""


class DataError(ValueError):
    """Malformed or inconsistent input data (datasets, run files, checkpoints)."""
