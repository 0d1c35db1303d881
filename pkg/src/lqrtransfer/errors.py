"""Exception hierarchy shared by every module of the package."""


class LQRTransferError(Exception):
    """Base class for all package errors."""


class DimensionError(LQRTransferError, ValueError):
    pass


class WeightError(LQRTransferError, ValueError):
    pass


class ConvergenceError(LQRTransferError, RuntimeError):
    pass


class RankError(LQRTransferError, ValueError):
    pass


class DataLengthError(LQRTransferError, ValueError):
    pass


class SampleComplexityError(DataLengthError):
    """Target trajectory too short for mode-based reconstruction (needs n+1 samples)."""


class NumericalError(LQRTransferError, ArithmeticError):
    pass


class ValidationError(LQRTransferError, ValueError):
    """Model fails the controllability/observability rank test."""


class ConjugacyError(LQRTransferError, ValueError):
    pass


class DictionaryTooSmall(LQRTransferError, ValueError):
    pass


class SearchLimitError(LQRTransferError, ValueError):
    """Too many candidate subsets to enumerate exhaustively."""
