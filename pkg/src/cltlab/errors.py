"""Exception hierarchy shared by every cltlab module."""


class CltLabError(Exception):
    """Base class for all cltlab errors."""


class ChainError(CltLabError, ValueError):
    pass


class NegativeEntry(ChainError):
    pass


class RowSumInvalid(ChainError):
    pass


class DimensionMismatch(ChainError):
    pass


class Reducible(ChainError):
    pass


class NoConvergence(CltLabError, ArithmeticError):
    pass


class NoSpectralGap(CltLabError, ArithmeticError):
    pass


class NotCentered(CltLabError, ValueError):
    pass


class DegenerateVariance(CltLabError, ValueError):
    pass


class EmptyGrid(CltLabError, ValueError):
    pass


class SingularResolvent(CltLabError, ArithmeticError):
    pass


class RankNotOne(CltLabError, ArithmeticError):
    pass


class AuditFailed(CltLabError):
    """A hypothesis audit did not hold; ``witness`` describes where."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class IdentityViolated(AuditFailed):
    pass


class NotLattice(CltLabError, ValueError):
    pass


class GridTooLarge(CltLabError, ValueError):
    pass


class QuadratureFailure(CltLabError, ArithmeticError):
    pass


class EmptySample(CltLabError, ValueError):
    pass


class OutOfRange(CltLabError, ValueError):
    pass


class InsufficientSamples(CltLabError, ValueError):
    pass


class BadRadius(CltLabError, ValueError):
    pass


class DegenerateInput(CltLabError, ValueError):
    pass


class ParseError(CltLabError, ValueError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ValidationError(CltLabError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
