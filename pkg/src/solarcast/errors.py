"""Exception hierarchy shared by every solarcast module."""


class SolarcastError(Exception):
    """Base class for all solarcast errors."""


class DataError(SolarcastError):
    """Problem with input data (maps to CLI exit code 2)."""


class SchemaMismatch(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class EmptyInput(DataError):
    pass


class NoOverlap(DataError):
    pass


class FrameMismatch(DataError):
    pass


class ColumnAllMissing(DataError):
    def __init__(self, column):
        super().__init__(f"column {column!r} has no non-missing values")
        self.column = column


class TooFewValues(DataError):
    pass


class TooFewRows(DataError):
    pass


class ZeroVariance(DataError):
    pass


class NegativeTarget(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class ColumnMismatch(DataError):
    pass


class EmptySpace(SolarcastError):
    pass


class ModelError(SolarcastError):
    """Problem raised while fitting or applying a model (CLI exit code 3)."""


class ModelSchemaMismatch(ModelError):
    pass


class NonFiniteInput(ModelError):
    pass


class TrainingDiverged(ModelError):
    """Loss or predictions became non-finite during training."""
