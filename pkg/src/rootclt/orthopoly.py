"""Orthonormal polynomial families on [-1, 1] and their reproducing kernels.

Every built-in family is a Jacobi family with weight
``(1 - x)**alpha * (1 + x)**beta``; the three-term recurrence of the
*orthonormal* polynomials is tabulated once in closed form so that high
degrees do not accumulate normalization drift.

Kernels follow the usual notation

    K_n^{(l,m)}(x, y) = sum_{j=0}^{n} p_j^{(l)}(x) p_j^{(m)}(y).

The scalar :func:`kernel` accumulates with :func:`math.fsum` (correctly
rounded), which makes ``K^{(l,m)}(x, y) == K^{(m,l)}(y, x)`` bit-exact.  The
vectorised helpers (:func:`kernel_pairs`, :func:`kernel_matrix`) feed the
quadrature and Monte Carlo hot paths and use BLAS accumulation instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidParameterError, NearDiagonalError

DEGREE_CAP = 5000
MAX_DERIV = 8
DIAGONAL_GUARD = 1e-8

__all__ = [
    "FamilyKind",
    "OrthonormalBasis",
    "make_family",
    "eval_basis",
    "kernel",
    "kernel_cd",
    "kernel_pairs",
    "kernel_matrix",
    "equilibrium_density",
    "equilibrium_mass",
    "DEGREE_CAP",
]


class FamilyKind(str, Enum):
    CHEBYSHEV1 = "chebyshev1"
    LEGENDRE = "legendre"
    JACOBI = "jacobi"
    GEGENBAUER = "gegenbauer"


def equilibrium_density(x):
    """Arcsine density ``1 / (pi sqrt(1 - x^2))`` of the equilibrium measure of [-1, 1]."""
    x = np.asarray(x, dtype=float)
    return 1.0 / (np.pi * np.sqrt(1.0 - x * x))


def equilibrium_mass(a, b):
    """Equilibrium (arcsine) mass of ``[a, b]``."""
    return (math.asin(b) - math.asin(a)) / math.pi


def _jacobi_coefficients(alpha, beta, size):
    """Jacobi-matrix entries of the orthonormal Jacobi polynomials.

    Returns ``(diag, offdiag, p0)`` with ``x p_j = b_{j+1} p_{j+1} + a_j p_j + b_j p_{j-1}``;
    ``offdiag[0]`` is a placeholder zero.
    """
    j = np.arange(size, dtype=float)
    ab = alpha + beta
    diag = np.empty(size)
    diag[0] = (beta - alpha) / (ab + 2.0)
    jj = j[1:]
    diag[1:] = (beta**2 - alpha**2) / ((2 * jj + ab) * (2 * jj + ab + 2.0))

    off = np.zeros(size)
    # j = 1 written with the (j + alpha + beta) factor cancelled: it vanishes
    # together with (2j + alpha + beta - 1) at alpha + beta = -1.
    off[1] = math.sqrt(4.0 * (1 + alpha) * (1 + beta) / ((2 + ab) ** 2 * (3 + ab)))
    jj = j[2:]
    num = 4.0 * jj * (jj + alpha) * (jj + beta) * (jj + ab)
    den = (2 * jj + ab) ** 2 * (2 * jj + ab + 1.0) * (2 * jj + ab - 1.0)
    off[2:] = np.sqrt(num / den)

    log_mu0 = (
        (ab + 1.0) * math.log(2.0)
        + math.lgamma(alpha + 1.0)
        + math.lgamma(beta + 1.0)
        - math.lgamma(ab + 2.0)
    )
    p0 = math.exp(-0.5 * log_mu0)
    return diag, off, p0


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """An orthonormal polynomial family on ``[-1, 1]``.

    Attributes
    ----------
    kind : FamilyKind
    alpha, beta : float
        Jacobi exponents of the weight ``(1-x)^alpha (1+x)^beta``.
    params : dict
        The user-facing parameters (``alpha``/``beta`` or ``lam``).
    support : tuple of float
    diag, offdiag : ndarray
        Jacobi-matrix entries up to :data:`DEGREE_CAP`.
    p0 : float
        The constant ``p_0``.
    """

    kind: FamilyKind
    alpha: float
    beta: float
    params: dict = field(default_factory=dict)
    support: tuple = (-1.0, 1.0)
    diag: np.ndarray = field(default=None, repr=False)
    offdiag: np.ndarray = field(default=None, repr=False)
    p0: float = field(default=None, repr=False)

    def __post_init__(self):
        diag, off, p0 = _jacobi_coefficients(self.alpha, self.beta, DEGREE_CAP + 2)
        diag.flags.writeable = False
        off.flags.writeable = False
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", off)
        object.__setattr__(self, "p0", p0)

    @property
    def name(self):
        if self.kind in (FamilyKind.JACOBI, FamilyKind.GEGENBAUER):
            inner = ",".join(f"{k}={v:g}" for k, v in self.params.items())
            return f"{self.kind.value}({inner})"
        return self.kind.value

    def recurrence(self, n):
        """Triples ``(A_j, B_j, C_j)`` for ``j = 0..n-1``.

        ``p_{j+1} = (A_j x + B_j) p_j - C_j p_{j-1}``.
        """
        _check_degree(n)
        b_next = self.offdiag[1 : n + 1]
        A = 1.0 / b_next
        B = -self.diag[:n] / b_next
        C = self.offdiag[:n] / b_next
        return A, B, C

    def log_leading_coeffs(self, n):
        """``log(gamma_j)`` for ``j = 0..n`` (the coefficients overflow past j ~ 1000)."""
        _check_degree(n)
        out = np.empty(n + 1)
        out[0] = math.log(self.p0)
        out[1:] = out[0] - np.cumsum(np.log(self.offdiag[1 : n + 1]))
        return out

    def leading_ratio(self, n):
        """``gamma_{n-1} / gamma_n``."""
        return float(self.offdiag[n])

    def weight(self, x):
        x = np.asarray(x, dtype=float)
        return (1.0 - x) ** self.alpha * (1.0 + x) ** self.beta

    def equilibrium_density(self, x):
        return equilibrium_density(x)


def _check_degree(n):
    if int(n) != n or n < 0:
        raise InvalidParameterError(f"degree must be a non-negative integer, got {n!r}")
    if n > DEGREE_CAP:
        raise InvalidParameterError(f"degree {n} exceeds the cap {DEGREE_CAP}")


def make_family(kind, **params) -> OrthonormalBasis:
    """Build one of the four built-in families.

    >>> make_family("jacobi", alpha=0.5, beta=-0.25).name
    'jacobi(alpha=0.5,beta=-0.25)'
    """
    try:
        kind = FamilyKind(str(kind).lower())
    except ValueError:
        raise InvalidParameterError(f"unknown family {kind!r}") from None

    if kind is FamilyKind.CHEBYSHEV1:
        return OrthonormalBasis(kind, -0.5, -0.5)
    if kind is FamilyKind.LEGENDRE:
        return OrthonormalBasis(kind, 0.0, 0.0)
    if kind is FamilyKind.JACOBI:
        alpha = float(params.get("alpha", 0.0))
        beta = float(params.get("beta", 0.0))
        if not (alpha > -1.0 and beta > -1.0):
            raise InvalidParameterError("Jacobi parameters need alpha > -1 and beta > -1")
        return OrthonormalBasis(kind, alpha, beta, {"alpha": alpha, "beta": beta})
    lam = float(params.get("lam", params.get("lambda", 0.5)))
    if not lam > -0.5:
        raise InvalidParameterError("Gegenbauer parameter needs lambda > -1/2")
    return OrthonormalBasis(kind, lam - 0.5, lam - 0.5, {"lam": lam})


def eval_basis(basis: OrthonormalBasis, n: int, x, max_deriv: int = 0) -> np.ndarray:
    """Table of ``p_j^{(k)}(x)`` for ``0 <= j <= n``, ``0 <= k <= max_deriv``.

    Each derivative order obeys its own recurrence obtained by differentiating
    the three-term recurrence ``k`` times::

        p_{j+1}^{(k)} = (A_j x + B_j) p_j^{(k)} + k A_j p_j^{(k-1)} - C_j p_{j-1}^{(k)}

    Returns an array of shape ``(max_deriv + 1, n + 1) + np.shape(x)``.
    """
    _check_degree(n)
    if int(max_deriv) != max_deriv or max_deriv < 0 or max_deriv > MAX_DERIV:
        raise InvalidParameterError(f"max_deriv must be in 0..{MAX_DERIV}, got {max_deriv!r}")
    x = np.asarray(x, dtype=float)
    out = np.zeros((max_deriv + 1, n + 1) + x.shape)
    out[0, 0] = basis.p0
    if n == 0:
        return out
    A, B, C = basis.recurrence(n)
    for j in range(n):
        lin = A[j] * x + B[j]
        prev = out[:, j - 1] if j > 0 else None
        for k in range(max_deriv + 1):
            val = lin * out[k, j]
            if k:
                val += k * A[j] * out[k - 1, j]
            if prev is not None:
                val -= C[j] * prev[k]
            out[k, j + 1] = val
    return out


def kernel(basis: OrthonormalBasis, n: int, x: float, y: float, l: int = 0, m: int = 0) -> float:
    """``K_n^{(l,m)}(x, y)`` by direct, correctly rounded summation over ``j = 0..n``."""
    if l not in (0, 1, 2) or m not in (0, 1, 2):
        raise InvalidParameterError("kernel derivative orders must be in {0, 1, 2}")
    k = max(l, m)
    px = eval_basis(basis, n, float(x), k)[l]
    py = eval_basis(basis, n, float(y), k)[m]
    return math.fsum((px * py).tolist())


def kernel_cd(basis: OrthonormalBasis, n: int, x: float, y: float) -> float:
    """``K_n(x, y)`` through the Christoffel-Darboux formula (verification path).

    Because ``K_n`` sums ``j = 0..n``, the closed form uses the degree ``n`` and
    ``n + 1`` polynomials::

        K_n(x, y) = (gamma_n / gamma_{n+1}) (p_{n+1}(x) p_n(y) - p_n(x) p_{n+1}(y)) / (x - y)
    """
    if n < 1 or n >= DEGREE_CAP:
        raise InvalidParameterError(f"Christoffel-Darboux needs 1 <= n < {DEGREE_CAP}")
    lo, hi = basis.support
    if abs(x - y) < DIAGONAL_GUARD * (hi - lo):
        raise NearDiagonalError(
            f"|x - y| = {abs(x - y):.3g} is below the diagonal guard; use kernel() instead"
        )
    px = eval_basis(basis, n + 1, float(x))[0]
    py = eval_basis(basis, n + 1, float(y))[0]
    ratio = basis.leading_ratio(n + 1)
    return ratio * (px[n + 1] * py[n] - px[n] * py[n + 1]) / (x - y)


def kernel_pairs(basis: OrthonormalBasis, n: int, x, y, orders=((0, 0),)) -> dict:
    """Kernels at matched point pairs ``(x[i], y[i])`` for every ``(l, m)`` in ``orders``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = max(max(o) for o in orders)
    tx = eval_basis(basis, n, x, k)
    ty = eval_basis(basis, n, y, k)
    return {(l, m): np.einsum("j...,j...->...", tx[l], ty[m]) for l, m in orders}


def kernel_matrix(basis: OrthonormalBasis, n: int, x, y, l: int = 0, m: int = 0) -> np.ndarray:
    """``K_n^{(l,m)}(x_i, y_j)`` for 1-d arrays ``x`` and ``y``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    k = max(l, m)
    tx = eval_basis(basis, n, x, k)[l]
    ty = eval_basis(basis, n, y, k)[m]
    return tx.T @ ty
