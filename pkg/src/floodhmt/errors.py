"""Exception types shared across the package.

The CLI maps these onto process exit codes: UsageError -> 1,
DataError -> 2, NumericalError -> 3.
"""


class FloodHmtError(Exception):
    """Base class for package errors."""


class UsageError(FloodHmtError):
    """Bad flags, options, or API arguments."""


class DataError(FloodHmtError):
    """Malformed or inconsistent input data."""


class GridParseError(DataError):
    """ASCII grid text that does not parse; the message names the line."""


class AlignmentError(DataError):
    """Co-registered grids whose geometry headers disagree."""


class NumericalError(FloodHmtError):
    """Numerical failure: non-positive-definite covariance, inconsistent EM, ..."""


class ParameterError(NumericalError):
    """Model parameters out of range or unusable."""
