"""Exception and warning types raised by pcfilter."""


class PCFilterError(Exception):
    """Base class for all library errors."""


class DomainError(PCFilterError, ValueError):
    """Input lies outside the mathematical domain of an operation."""


class EmptyInputError(DomainError):
    pass


class TruncationError(DomainError):
    """Requested truncation exceeds the sampling resolution."""


class AliasingError(DomainError):
    """Frequency grid too coarse for the requested polynomial order."""


class DimensionError(DomainError):
    pass


class FactorizationDomainError(DomainError):
    """Density is not uniformly positive definite on the grid."""


class SingularFactorError(DomainError):
    pass


class InfeasibleCandidateError(DomainError):
    """Residual density is not PSD, or a density class is empty."""


class HorizonError(DomainError):
    """Not enough observed history for the requested filter."""


class ConvergenceError(PCFilterError, RuntimeError):
    """Iteration stopped before reaching tolerance.

    The last residual is kept on ``residual`` so callers can decide whether
    the approximation is still usable.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NumericalInconsistencyError(PCFilterError, ArithmeticError):
    """A quantity that must be nonnegative came out negative."""


class TruncationWarning(UserWarning):
    """A truncated series has a non-negligible tail."""


class IllConditionedWarning(UserWarning):
    pass
