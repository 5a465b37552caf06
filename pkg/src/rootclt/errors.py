"""Exception hierarchy shared by all modules."""


class RootCLTError(Exception):
    """Base class for library errors."""


class InvalidParameterError(RootCLTError, ValueError):
    """A family parameter or numeric argument is outside its admissible range."""


class NearDiagonalError(RootCLTError, ValueError):
    """Christoffel-Darboux evaluation requested too close to the diagonal."""


class NumericalDegeneracyError(RootCLTError, ArithmeticError):
    """A quantity that must be positive came out non-positive beyond roundoff."""


class FormulaInconsistencyError(RootCLTError, ArithmeticError):
    """An intermediate value left the domain its formula requires (e.g. arcsin)."""


class AccuracyNotReachedError(RootCLTError):
    """Adaptive quadrature hit its refinement cap.

    The best available estimate is kept on ``partial`` so callers can decide
    whether it is good enough.
    """

    def __init__(self, message, partial=None, error_estimate=None):
        super().__init__(message)
        self.partial = partial
        self.error_estimate = error_estimate


class DegenerateInputError(RootCLTError, ValueError):
    """Input that is valid type-wise but has probability zero (all-zero coefficients)."""


class InsufficientDataError(RootCLTError, ValueError):
    """Too few samples for the requested statistic."""
