"""Exception types shared across the package."""


class FairadvError(Exception):
    """Base class for all package errors."""


class ShapeError(FairadvError):
    """Array dimensions do not match what an operation requires."""


class DomainError(FairadvError):
    """Input values outside the mathematical domain (NaN/inf, bad range)."""


class SchemaError(FairadvError):
    """Dataset schema is malformed or inconsistent with the source file."""


class DegenerateDataError(FairadvError):
    """A sensitive group or (label, group) cell required by a metric is empty."""


class NumericError(FairadvError):
    """Non-finite values where finite arithmetic was required."""


class TrainingError(FairadvError):
    """Training diverged or could not proceed."""
