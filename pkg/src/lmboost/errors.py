"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
DegenerateDataError -> 4.
"""


class LmboostError(Exception):
    """Base class for all package errors."""


class ConfigError(LmboostError):
    """Invalid configuration: unknown key, missing seed, bad value."""


class DataError(LmboostError):
    """Malformed input data (parse failures, inconsistent records)."""


class DegenerateDataError(LmboostError):
    """Numerically degenerate input, e.g. a table with zero occurrences."""


class OutOfDomainError(LmboostError):
    """A coordinate falls outside the partition of its dimension."""

    def __init__(self, dim_name, value):
        self.dim_name = dim_name
        self.value = value
        super().__init__(f"coordinate {value!r} outside partition of dimension {dim_name!r}")


class EnvelopeViolationError(LmboostError):
    """A thinning proposal saw a hazard above its dominating bound."""


class InvalidArgumentError(LmboostError, ValueError):
    """An argument violates an operation's precondition."""
