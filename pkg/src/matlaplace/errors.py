"""Exception hierarchy.

Errors fall into two families so the CLI can map them to exit codes:
``DataError`` (bad input, exit 2) and ``NumericalError`` (factorization
failures, exit 3).
"""


class MatLaplaceError(Exception):
    """Base class for all package errors."""


class DataError(MatLaplaceError, ValueError):
    pass


class NumericalError(MatLaplaceError, ArithmeticError):
    pass


class NotSymmetric(DataError):
    pass


class NotPositiveDefinite(DataError):
    pass


class NotPsd(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptySample(DataError):
    pass


class EmptyList(DataError):
    pass


class InvalidAlpha(DataError):
    pass


class InvalidReps(DataError):
    pass


class InvalidShape(DataError):
    pass


class NonPositiveValue(DataError):
    pass


class TooShort(DataError):
    pass


class GroupTooSmall(DataError):
    pass


class EmptySide(DataError):
    pass


class ConfigError(DataError):
    pass


class PivotFailure(NumericalError):
    pass


class ReplicationError(MatLaplaceError):
    """A Monte Carlo replication failed; ``index`` names the replication."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"replication {index} failed: {cause}")
        self.index = index
        self.cause = cause
