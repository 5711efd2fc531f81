"""Exception types shared across the package."""


class TrmfError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(TrmfError, ValueError):
    """Operands have incompatible shapes."""


class NotSPD(TrmfError):
    """Matrix is not symmetric positive definite."""


class NonFiniteEncountered(TrmfError, ArithmeticError):
    """A NaN or infinity showed up during an iterative solve."""


class SeriesTooShort(TrmfError, ValueError):
    """The time axis is shorter than the largest lag requires."""


class DegenerateRidge(TrmfError):
    """Unregularized least squares hit a rank-deficient design."""


class MissingValuesUnsupported(TrmfError):
    """The method requires a fully observed matrix."""


class EmptyMask(TrmfError, ValueError):
    """No observed entries."""


class ZeroDenominator(TrmfError, ZeroDivisionError):
    """Metric denominator (mean absolute truth) is zero."""


class ParseError(TrmfError, ValueError):
    """Malformed CSV cell; carries the 1-based row/column location."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", col {col})" if col is not None else ")")
        super().__init__(message + loc)
        self.row = row
        self.col = col


class RaggedRows(ParseError):
    """CSV rows have inconsistent lengths."""


class VersionMismatch(TrmfError):
    """Model file was written by an unknown format version."""


class CorruptFile(TrmfError):
    """Model file is truncated or fails its checksum."""


class TooManyWindows(TrmfError, ValueError):
    """Rolling split does not fit into the series length."""


class IndexOutOfBounds(TrmfError, IndexError):
    """Requested (series, time) target lies outside the matrix."""
