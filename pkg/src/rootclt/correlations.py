"""Normalized correlation functions of the rescaled random polynomial.

All public functions take *rescaled* coordinates ``s, t`` (the original
coordinate is ``s / n``).  With ``K = K_n`` and its derivative kernels:

* ``V_n(t)^2 = K(t/n, t/n) / n``
* ``rbar(s, t) = K(s/n, t/n) / sqrt(K(s/n, s/n) K(t/n, t/n))``
* ``v_n(t)^2 = K11/(n^2 K) - (K01/(n K))^2`` on the diagonal at ``t/n``
* ``rtilde_prime`` is the covariance of the standardized process at ``s`` with
  its standardized derivative at ``t``; ``rtilde_doubleprime`` the covariance of
  the standardized derivatives.

The bulk limits are expressed through the sinc kernel ``S(u) = sin(pi u)/(pi u)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NumericalDegeneracyError
from .orthopoly import OrthonormalBasis, eval_basis, equilibrium_density

SERIES_SWITCH = 0.05
RADICAND_TOL = 1e-12


def tau_lm(l: int, m: int) -> float:
    """Diagonal limit constants: ``(-1)^((l-m)/2) / (l+m+1)`` for even ``l+m``, else 0."""
    if (l + m) % 2:
        return 0.0
    return (-1.0) ** ((l - m) // 2) / (l + m + 1)


TAU_TABLE = {(l, m): tau_lm(l, m) for l in range(5) for m in range(5) if l + m <= 4}


def sinc(u):
    """``S(u) = sin(pi u) / (pi u)``, with a Taylor branch near 0."""
    return _sinc_derivs(u)[0]


def _sinc_derivs(u):
    u = np.asarray(u, dtype=float)
    z = np.pi * u
    small = np.abs(u) < SERIES_SWITCH
    zs = np.where(small, 1.0, z)
    sn, cs = np.sin(zs), np.cos(zs)
    f0 = sn / zs
    f1 = (zs * cs - sn) / zs**2
    f2 = -sn / zs - 2.0 * cs / zs**2 + 2.0 * sn / zs**3
    z2 = z * z
    s0 = 1.0 - z2 / 6.0 + z2**2 / 120.0 - z2**3 / 5040.0 + z2**4 / 362880.0
    s1 = z * (-1.0 / 3.0 + z2 / 30.0 - z2**2 / 840.0 + z2**3 / 45360.0 - z2**4 / 3991680.0)
    s2 = -1.0 / 3.0 + z2 / 10.0 - z2**2 / 168.0 + z2**3 / 6480.0 - z2**4 / 443520.0
    # d/du = pi d/dz
    S = np.where(small, s0, f0)
    S1 = np.pi * np.where(small, s1, f1)
    S2 = np.pi**2 * np.where(small, s2, f2)
    if S.ndim == 0:
        return float(S), float(S1), float(S2)
    return S, S1, S2


@dataclass(frozen=True)
class SincLimits:
    theta: float
    tau: float
    omega: float
    S_val: float
    S1_val: float
    S2_val: float
    limits: tuple  # (rbar, rtilde', rtilde'', v)


def sinc_limits(theta: float, tau: float, omega_fn=equilibrium_density) -> SincLimits:
    """Large-``n`` limits of the correlations at bulk point ``theta``, separation ``tau``."""
    omega = float(omega_fn(theta))
    S, S1, S2 = _sinc_derivs(tau * omega)
    lim = (S, math.sqrt(3.0) * S1 / math.pi, -3.0 * S2 / math.pi**2, math.pi * omega / math.sqrt(3.0))
    return SincLimits(theta, tau, omega, S, S1, S2, lim)


@dataclass(frozen=True)
class CorrelationBundle:
    """Correlations at rescaled points ``s, t`` (arrays broadcast together)."""

    n: int
    s: np.ndarray
    t: np.ndarray
    rbar: np.ndarray
    rtp: np.ndarray  # rtilde'(s, t)
    rtp_rev: np.ndarray  # rtilde'(t, s)
    rtpp: np.ndarray
    v_s: np.ndarray
    v_t: np.ndarray


class _Diagonal:
    """Diagonal kernel quantities ``K``, ``K01/(nK)`` and ``v`` at a set of points."""

    def __init__(self, n, table):
        p, dp = table[0], table[1]
        K = np.einsum("j...,j...->...", p, p)
        if np.any(K <= 0):
            raise NumericalDegeneracyError("K_n(x, x) <= 0; kernel evaluation is broken")
        K01 = np.einsum("j...,j...->...", p, dp)
        K11 = np.einsum("j...,j...->...", dp, dp)
        self.K = K
        self.drift = K01 / (n * K)  # K01 / (n K)
        self.v = _sqrt_radicand(K11 / (n * n * K) - self.drift**2)


def _sqrt_radicand(rad):
    rad = np.asarray(rad, dtype=float)
    if np.any(rad < -RADICAND_TOL):
        raise NumericalDegeneracyError(
            f"negative radicand {float(np.min(rad)):.3g} in derivative variance"
        )
    return np.sqrt(np.clip(rad, 0.0, None))


def _check_interior(basis, x):
    lo, hi = basis.support
    if np.any((np.asarray(x) <= lo) | (np.asarray(x) >= hi)):
        raise InvalidParameterError("points must lie strictly inside the support")


def _tables(basis, n, s, t):
    if n < 1:
        raise InvalidParameterError("rescaled correlations need n >= 1")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s, t = np.broadcast_arrays(s, t)
    _check_interior(basis, s / n)
    _check_interior(basis, t / n)
    return s, t, eval_basis(basis, n, s / n, 1), eval_basis(basis, n, t / n, 1)


def _assemble(n, Kst, K01st, K10st, K11st, ds, dt):
    """Correlations from off-diagonal kernels and diagonal data (broadcasting)."""
    root = np.sqrt(ds.K * dt.K)
    rbar = Kst / root
    rtp = (K01st / n - dt.drift * Kst) / (dt.v * root)
    rtp_rev = (K10st / n - ds.drift * Kst) / (ds.v * root)
    rtpp = (
        K11st / n**2 - dt.drift * K10st / n - ds.drift * K01st / n + ds.drift * dt.drift * Kst
    ) / (ds.v * dt.v * root)
    return rbar, rtp, rtp_rev, rtpp


def correlation_bundle(basis: OrthonormalBasis, n: int, s, t) -> CorrelationBundle:
    """All correlations at matched rescaled points ``(s[i], t[i])``."""
    s, t, ts, tt = _tables(basis, n, s, t)
    ds, dt = _Diagonal(n, ts), _Diagonal(n, tt)
    dot = lambda a, b: np.einsum("j...,j...->...", a, b)  # noqa: E731
    Kst = dot(ts[0], tt[0])
    K01 = dot(ts[0], tt[1])
    K10 = dot(ts[1], tt[0])
    K11 = dot(ts[1], tt[1])
    rbar, rtp, rtp_rev, rtpp = _assemble(n, Kst, K01, K10, K11, ds, dt)
    rbar = np.where(s == t, 1.0, rbar)  # exact self-correlation
    return CorrelationBundle(n, s, t, rbar, rtp, rtp_rev, rtpp, ds.v, dt.v)


def correlation_grid(basis: OrthonormalBasis, n: int, s) -> CorrelationBundle:
    """Correlations on the tensor grid ``s x s`` (matrices indexed ``[i, j] = (s_i, s_j)``)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    _check_interior(basis, s / n)
    tab = eval_basis(basis, n, s / n, 1)
    d = _Diagonal(n, tab)
    p, dp = tab[0], tab[1]
    K = p.T @ p
    K01 = p.T @ dp
    K11 = dp.T @ dp
    col = _Diagonal.__new__(_Diagonal)
    col.K, col.drift, col.v = d.K[None, :], d.drift[None, :], d.v[None, :]
    row = _Diagonal.__new__(_Diagonal)
    row.K, row.drift, row.v = d.K[:, None], d.drift[:, None], d.v[:, None]
    rbar, rtp, rtp_rev, rtpp = _assemble(n, K, K01, K01.T, K11, row, col)
    S, T = np.meshgrid(s, s, indexing="ij")
    rbar = np.where(S == T, 1.0, rbar)
    return CorrelationBundle(n, S, T, rbar, rtp, rtp_rev, rtpp, row.v, col.v)


def _scalarize(a):
    return float(a) if np.ndim(a) == 0 else a


def big_v(basis: OrthonormalBasis, n: int, t):
    """Standard deviation ``V_n(t) = sqrt(K_n(t/n, t/n) / n)`` of the rescaled process."""
    if n < 1:
        raise InvalidParameterError("big_v needs n >= 1")
    t = np.asarray(t, dtype=float)
    _check_interior(basis, t / n)
    p = eval_basis(basis, n, t / n)[0]
    K = np.einsum("j...,j...->...", p, p)
    if np.any(K <= 0):
        raise NumericalDegeneracyError("K_n(x, x) <= 0")
    return _scalarize(np.sqrt(K / n))


def v_n(basis: OrthonormalBasis, n: int, t):
    """Standard deviation of the derivative of the standardized process."""
    if n < 1:
        raise InvalidParameterError("v_n needs n >= 1")
    t = np.asarray(t, dtype=float)
    _check_interior(basis, t / n)
    return _scalarize(_Diagonal(n, eval_basis(basis, n, t / n, 1)).v)


def rbar(basis: OrthonormalBasis, n: int, s, t):
    """Correlation of the standardized process at rescaled points ``s`` and ``t``."""
    s, t, ts, tt = _tables(basis, n, s, t)
    Kst = np.einsum("j...,j...->...", ts[0], tt[0])
    Kss = np.einsum("j...,j...->...", ts[0], ts[0])
    Ktt = np.einsum("j...,j...->...", tt[0], tt[0])
    if np.any(Kss <= 0) or np.any(Ktt <= 0):
        raise NumericalDegeneracyError("K_n(x, x) <= 0")
    return _scalarize(np.where(s == t, 1.0, Kst / np.sqrt(Kss * Ktt)))


def rtilde_prime(basis: OrthonormalBasis, n: int, s, t):
    """Covariance of the standardized process at ``s`` with its standardized derivative at ``t``."""
    return _scalarize(correlation_bundle(basis, n, s, t).rtp)


def rtilde_doubleprime(basis: OrthonormalBasis, n: int, s, t):
    """Covariance of the standardized derivative at ``s`` and at ``t``."""
    return _scalarize(correlation_bundle(basis, n, s, t).rtpp)
