"""Error taxonomy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4. Library code raises them directly.
"""


class WkdError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(WkdError):
    """Invalid configuration, usage, or incompatible model/data setup."""


class DataError(WkdError):
    """Malformed or missing input data (corpus files, embedding files)."""


class FormatError(DataError):
    """Binary file does not conform to its declared layout."""


class NumericError(WkdError):
    """Non-finite values or other numeric failures during computation."""
