"""Exception hierarchy.

Input errors (bad files, bad group specs, invalid arguments) and numeric
errors (degenerate data, failed solves) are kept apart so that callers such
as the command line tool can map them to distinct exit codes.
"""


class DhsicError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DhsicError, ValueError):
    """The caller supplied malformed or inconsistent input."""


class NumericError(DhsicError, ArithmeticError):
    """A computation is undefined or failed for the supplied data."""


class DimensionMismatch(InputError):
    pass


class IndexOutOfRange(InputError):
    pass


class TooLarge(InputError):
    """An exhaustive enumeration would exceed its budget."""


class UnsupportedData(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, row=None, col=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if col is not None:
            loc.append(f"column {col}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.col = col


class GroupSpecError(InputError):
    pass


class NonIntegerDiscrete(InputError):
    pass


class DegenerateSample(NumericError):
    """All points are identical, so the median heuristic has no scale."""


class SampleTooSmall(NumericError):
    pass


class DegenerateMoments(NumericError):
    """Estimated null mean or variance is not strictly positive."""


class NonConvergence(NumericError):
    pass


class SingularSystem(NumericError):
    pass


class CholeskyFailure(NumericError):
    pass
