"""Numerics for real roots of Gaussian random orthogonal polynomials.

Modules
-------
orthopoly     orthonormal Jacobi-type families, derivatives and kernels
correlations  normalized correlation functions and their sinc limits
kacrice       Kac-Rice intensities, mean and variance of root counts
chaos         Hermite chaos coefficients and per-level variances
montecarlo    seeded sampling, exact root counting, normality tests
cli           command-line driver (``rootclt``)
"""

from .errors import (
    AccuracyNotReachedError,
    DegenerateInputError,
    FormulaInconsistencyError,
    InsufficientDataError,
    InvalidParameterError,
    NearDiagonalError,
    NumericalDegeneracyError,
    RootCLTError,
)
from .orthopoly import make_family

__version__ = "0.1.0"

__all__ = [
    "make_family",
    "RootCLTError",
    "InvalidParameterError",
    "NearDiagonalError",
    "NumericalDegeneracyError",
    "FormulaInconsistencyError",
    "AccuracyNotReachedError",
    "DegenerateInputError",
    "InsufficientDataError",
]
