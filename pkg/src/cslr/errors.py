"""Exception types raised across the package."""


class CslrError(Exception):
    """Base class for all package errors."""


class DataError(CslrError):
    """Input data is malformed or unusable."""


class MissingColumn(DataError):
    pass


class NonBinaryLabel(DataError):
    def __init__(self, row, column, value):
        super().__init__(f"row {row}, column {column!r}: label {value!r} is not 0 or 1")
        self.row = row
        self.column = column
        self.value = value


class NonNumericCell(DataError):
    def __init__(self, row, column, value):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")
        self.row = row
        self.column = column
        self.value = value


class DimensionMismatch(DataError, ValueError):
    pass


class Degenerate(DataError):
    """Training data holds a single class."""


class FoldDegenerate(Degenerate):
    """A cross-validation fold lacks one of the classes."""


class EmptyInput(DataError, ValueError):
    pass


class ConstantInput(DataError, ValueError):
    pass


class AllZeroWeights(CslrError, ValueError):
    pass


class NumericalFailure(CslrError, ArithmeticError):
    """An objective or iterate became non-finite."""
