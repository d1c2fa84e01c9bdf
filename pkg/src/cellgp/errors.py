"""Exception types raised across the package."""


class CellGPError(Exception):
    """Base class for every error raised by cellgp."""


class NotPositiveDefinite(CellGPError):
    pass


class DimensionMismatch(CellGPError, ValueError):
    pass


class IndexOutOfRange(CellGPError, IndexError):
    pass


class TooFewPoints(CellGPError, ValueError):
    pass


class OptimizerFailed(CellGPError):
    pass


class ObjectiveFailure(CellGPError):
    pass


class UnknownCell(CellGPError, KeyError):
    pass


class EmptyInput(CellGPError, ValueError):
    pass


class DataError(CellGPError, ValueError):
    """Problems with an input capacity file or a scenario definition."""


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateCycle(ParseError):
    pass


class NonPositiveCapacity(ParseError):
    pass


class TrainCountExceedsData(DataError):
    pass


class ModelFormatError(CellGPError, ValueError):
    pass
