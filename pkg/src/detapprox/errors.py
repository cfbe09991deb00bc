"""Exception types raised by detapprox."""

from __future__ import annotations


class DetApproxError(Exception):
    """Base class for all library errors."""


class IndexOutOfRange(DetApproxError, IndexError):
    pass


class NonFiniteValue(DetApproxError, ValueError):
    pass


class PartitionMismatch(DetApproxError, ValueError):
    pass


class DimensionMismatch(DetApproxError, ValueError):
    pass


class SingularBlock(DetApproxError, ArithmeticError):
    """A diagonal block failed the relative pivot test."""

    def __init__(self, block: int, message: str | None = None):
        self.block = block
        super().__init__(message or f"diagonal block {block} is numerically singular")


class ParseError(DetApproxError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class UnsupportedFormat(DetApproxError, ValueError):
    pass


class RhoNotLessThanOne(DetApproxError, ValueError):
    pass


class MemoryBudgetExceeded(DetApproxError, MemoryError):
    pass


class CheckerboardViolation(DetApproxError, ArithmeticError):
    """An odd power of an odd-checkerboard matrix had a non-negligible trace."""


class EigenvalueBelowMinusOne(DetApproxError, ValueError):
    pass


class ZeroDiagonal(DetApproxError, ValueError):
    pass


class NotHermitian(DetApproxError, ValueError):
    pass


class NotPositiveDefinite(DetApproxError, ValueError):
    pass


class CholeskyBreakdown(DetApproxError, ArithmeticError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"Cholesky breakdown on pattern of row {index}")


class SingularMatrix(DetApproxError, ArithmeticError):
    pass


class DenseCapExceeded(DetApproxError, MemoryError):
    pass


class OrderTooLarge(DetApproxError, ValueError):
    pass


class NonPositiveEigenvalue(DetApproxError, ValueError):
    pass


class NonPositiveDiagonal(UserWarning):
    """Warning: a diagonal entry is not real positive, so the phase is nonzero."""


__all__ = [
    name
    for name, obj in dict(globals()).items()
    if isinstance(obj, type) and issubclass(obj, (Exception, Warning))
]
