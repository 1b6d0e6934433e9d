"""Exception hierarchy shared by the library and the command-line front end."""


class HdrdaError(Exception):
    """Base class for all errors raised by :mod:`hdrda`."""


class InputError(HdrdaError, ValueError):
    """Invalid user input: bad shapes, out-of-range parameters, bad files."""


class ComputationError(HdrdaError, ArithmeticError):
    """A numerical routine could not complete."""


class DimensionMismatch(InputError):
    def __init__(self, expected, got, what="p"):
        self.expected = expected
        self.got = got
        super().__init__(f"model expects {what}={expected}, data has {what}={got}")


class Degenerate(ComputationError):
    """The Woodbury factorization is undefined (the diagonal term is singular)."""


class NotPD(ComputationError):
    """A matrix that must be positive definite failed to factorize."""


class RankZero(ComputationError):
    """Every eigenvalue of the pooled covariance is below the rank tolerance."""


class EmptyGrid(InputError):
    pass


class BadDimension(InputError):
    pass


class BadCount(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, row=None, column=None, path=None):
        self.row = row
        self.column = column
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class MissingLabel(ParseError):
    pass


class NonNumericFeature(ParseError):
    pass


class CorruptFile(InputError):
    pass


class VersionMismatch(InputError):
    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(
            f"model file format version {found} is not supported "
            f"(this build reads version {expected})"
        )
