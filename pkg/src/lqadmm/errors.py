"""Exception types raised across the package."""


class LQAdmmError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(LQAdmmError, ValueError):
    pass


class InvalidParameterError(LQAdmmError, ValueError):
    pass


class UnsupportedOperatorError(LQAdmmError, TypeError):
    """No explicit diagonalization or structured solver applies."""


class TooLargeError(LQAdmmError, ValueError):
    """Dense materialization requested above the configured cap."""


class NonConvergenceError(LQAdmmError, RuntimeError):
    pass


class ComplexSpectrumError(LQAdmmError, RuntimeError):
    """The iteration matrix has eigenvalues with non-negligible imaginary part."""


class InsufficientDataError(LQAdmmError, ValueError):
    pass


class DomainError(LQAdmmError, ValueError):
    pass


class DegenerateSpectrumError(DomainError):
    """lambda_1 + lambda_n == 0, so the relaxation formula is undefined."""


class DegenerateConstantsError(LQAdmmError, ValueError):
    pass


class EmptyPartitionError(LQAdmmError, ValueError):
    pass


class IndefiniteSystemError(LQAdmmError, ValueError):
    pass


class MalformedFileError(LQAdmmError, ValueError):
    pass
