"""Exception hierarchy shared by every module of the package."""


class AdaPartError(Exception):
    """Base class for all errors raised by this package."""


class MatrixFormatError(AdaPartError, ValueError):
    """A Matrix Market file could not be turned into a non-negative matrix.

    ``line`` holds the 1-based line number of the first offending line when
    one can be named.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedHeader(MatrixFormatError):
    pass


class NonSquare(MatrixFormatError):
    pass


class NegativeEntry(MatrixFormatError):
    pass


class DuplicateEntry(MatrixFormatError):
    pass


class InvalidMatrix(AdaPartError, ValueError):
    """An in-memory array violates the non-negative square matrix contract."""


class DimensionTooLarge(AdaPartError, ValueError):
    pass


class NotBlockDiagonal(AdaPartError, ValueError):
    pass


class SizeMismatch(AdaPartError, ValueError):
    pass


class InvalidArgs(AdaPartError, ValueError):
    pass


class ZeroPermanent(AdaPartError):
    """No permutation has positive weight, so there is nothing to sample."""


class RejectionCapExceeded(AdaPartError):
    pass


class DegenerateBootstrap(AdaPartError):
    """Raised when no trial was accepted, so no lower bound exists."""


class SingularInnovationCovariance(AdaPartError, ValueError):
    pass


class DeadParticleSet(AdaPartError):
    pass
