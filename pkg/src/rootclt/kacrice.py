"""Kac-Rice intensities and quadrature for the mean and variance of root counts.

For the Gaussian polynomial ``P = sum xi_j p_j`` the first intensity is

    rho_1(x) = (1/pi) sqrt(K11(x,x)/K(x,x) - (K01(x,x)/K(x,x))^2)

and the second intensity is built from ``Delta = K(x,x)K(y,y) - K(x,y)^2`` and
the conditional covariance ``Omega`` of ``(P'(x), P'(y))`` given
``P(x) = P(y) = 0``.  ``E N = int rho_1`` and
``Var N = int int (rho_2 - rho_1 rho_1) + int rho_1``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._quad import gauss_nodes, panel_nodes
from .constants import MEAN_INTENSITY_SCALE
from .errors import (
    AccuracyNotReachedError,
    FormulaInconsistencyError,
    InvalidParameterError,
    NumericalDegeneracyError,
)
from ._kernels import K01XX, K01YY, K11XX, K11YY, KXX, KYY, pair_stats
from .orthopoly import OrthonormalBasis, eval_basis, equilibrium_density

ARCSIN_TOL = 1e-12
MIN_SEPARATION = 1e-6
MAX_LEVELS = 14
BAND_OSCILLATIONS = 10
NEAR_NODES = 32
FAR_NODES = 8


@dataclass(frozen=True)
class KacRiceIntensities:
    x: np.ndarray
    y: np.ndarray
    rho1_x: np.ndarray
    rho1_y: np.ndarray
    rho2: np.ndarray
    delta: np.ndarray
    omega11: np.ndarray
    omega22: np.ndarray
    omega12: np.ndarray


@dataclass(frozen=True)
class KacRiceResult:
    a: float
    b: float
    n: int
    mean: float
    variance: float
    quad_error: float
    c_ab: float

    def to_dict(self):
        return {
            "interval": [self.a, self.b],
            "n": self.n,
            "mean": self.mean,
            "variance": self.variance,
            "quad_error": self.quad_error,
            "c_ab": self.c_ab,
        }


def _check_interval(basis, a, b):
    lo, hi = basis.support
    if not (lo < a <= b < hi):
        raise InvalidParameterError(f"[{a}, {b}] must lie strictly inside {basis.support}")


class _Diag:
    """Diagonal kernels ``K``, ``K01``, ``K11`` at a set of points."""

    def __init__(self, table):
        p, dp = table[0], table[1]
        self.K = np.einsum("j...,j...->...", p, p)
        self.K01 = np.einsum("j...,j...->...", p, dp)
        self.K11 = np.einsum("j...,j...->...", dp, dp)

    def rho1(self):
        return _rho1_from_sums(self.K, self.K01, self.K11)


def rho1(basis: OrthonormalBasis, n: int, x):
    """First Kac-Rice intensity (expected roots per unit length) at ``x``."""
    if n < 1:
        raise InvalidParameterError("rho1 needs n >= 1")
    x = np.asarray(x, dtype=float)
    lo, hi = basis.support
    if np.any((x <= lo) | (x >= hi)):
        raise InvalidParameterError("x must lie strictly inside the support")
    out = _Diag(eval_basis(basis, n, x, 1)).rho1()
    return float(out) if out.ndim == 0 else out


def _intensities(dx, dy, Kxy, K01xy, K01yx, K11xy, check=True):
    """``(rho2, Delta, Omega11, Omega22, Omega12)`` from kernel blocks (broadcasting).

    ``K01xy = sum p_j(x) p_j'(y)`` and ``K01yx = sum p_j(y) p_j'(x)``.  This
    is the textbook assembly; it cancels badly once ``n |x - y|`` is small, so
    it is only used for well separated points (see :func:`_matched`).
    """
    Kxx, Kyy = dx.K, dy.K
    a, d = dx.K01, dy.K01  # K01(x,x), K01(y,y)
    delta = Kxx * Kyy - Kxy * Kxy
    if check and np.any(delta <= 0):
        raise NumericalDegeneracyError("Delta <= 0: points too close or kernel broken")
    o11 = dx.K11 - (Kyy * a * a - 2.0 * Kxy * a * K01yx + Kxx * K01yx**2) / delta
    o22 = dy.K11 - (Kyy * K01xy**2 - 2.0 * Kxy * K01xy * d + Kxx * d * d) / delta
    o12 = K11xy - (
        Kyy * a * K01xy - Kxy * K01xy * K01yx - Kxy * a * d + Kxx * K01yx * d
    ) / delta
    denom = np.sqrt(o11 * o22)
    arg = o12 / denom
    if check and np.any(np.abs(arg) > 1.0 + ARCSIN_TOL):
        raise FormulaInconsistencyError("conditional correlation outside [-1, 1]")
    arg = np.clip(arg, -1.0, 1.0)
    det = np.clip(o11 * o22 - o12 * o12, 0.0, None)
    s = MEAN_INTENSITY_SCALE**2
    rho2 = s * (np.sqrt(det) + o12 * np.arcsin(arg)) / (math.pi**2 * np.sqrt(delta))
    return rho2, delta, o11, o22, o12


def _rho1_from_sums(K, K01, K11):
    if np.any(K <= 0):
        raise NumericalDegeneracyError("K_n(x, x) <= 0")
    rad = K11 / K - (K01 / K) ** 2
    if np.any(rad < -1e-12 * K11 / K):
        raise NumericalDegeneracyError("negative radicand in first intensity")
    return MEAN_INTENSITY_SCALE * np.sqrt(np.clip(rad, 0.0, None)) / math.pi


def _matched(basis, n, x, y, check=True):
    """Intensities at matched pairs ``(x[i], y[i])`` via divided differences.

    Returns ``(rho2, rho1_x, rho1_y, Delta, Omega11, Omega22, Omega12)``.  The
    conditional covariance is obtained as a Schur complement in the basis
    ``p[x], p[x,y], p[x,x,y], p[x,x,y,y]``, which keeps full relative
    accuracy down to ``|x - y| ~ 1e-6`` and below.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = x.shape
    A, B, C = basis.recurrence(n)
    S = pair_stats(A, B, C, basis.p0, np.ascontiguousarray(x.ravel()),
                   np.ascontiguousarray(y.ravel()))
    S = S.reshape((16,) + shape)
    aa, ab, bb, ac, bc, ae, be, cc, ce, ee = S[:10]
    u = y - x

    gram = aa * bb - ab * ab
    if check and np.any(gram <= 0):
        raise NumericalDegeneracyError("Delta <= 0: points too close or kernel broken")

    def cond(va, vb, wa, wb, vw):
        return vw - (bb * va * wa - ab * (va * wb + vb * wa) + aa * vb * wb) / gram

    wcc = cond(ac, bc, ac, bc, cc)
    wce = cond(ac, bc, ae, be, ce)
    wee = cond(ae, be, ae, be, ee)
    w11 = wcc
    w12 = wcc + u * wce
    w22 = wcc + u * (2.0 * wce + u * wee)
    det_ce = wcc * wee - wce * wce
    if check and np.any(det_ce < -ARCSIN_TOL * wcc * wee):
        raise FormulaInconsistencyError("conditional correlation outside [-1, 1]")
    root = np.abs(u) * np.sqrt(np.clip(det_ce, 0.0, None))
    s = MEAN_INTENSITY_SCALE**2
    rho2 = s * np.abs(u) * (root + w12 * np.arctan2(w12, root)) / (math.pi**2 * np.sqrt(gram))
    r1x = _rho1_from_sums(S[KXX], S[K01XX], S[K11XX])
    r1y = _rho1_from_sums(S[KYY], S[K01YY], S[K11YY])
    u2 = u * u
    return rho2, r1x, r1y, u2 * gram, u2 * w11, u2 * w22, -u2 * w12


def rho2(basis: OrthonormalBasis, n: int, x, y) -> KacRiceIntensities:
    """Second Kac-Rice intensity at ``(x, y)`` together with its ingredients."""
    if n < 1:
        raise InvalidParameterError("rho2 needs n >= 1")
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    lo, hi = basis.support
    for z in (x, y):
        if np.any((z <= lo) | (z >= hi)):
            raise InvalidParameterError("points must lie strictly inside the support")
    if np.any(np.abs(x - y) < MIN_SEPARATION):
        raise InvalidParameterError(
            f"|x - y| < {MIN_SEPARATION}: the two-point formula is numerically singular there"
        )
    r2, r1x, r1y, delta, o11, o22, o12 = _matched(basis, n, x, y)
    sc = lambda z: float(z) if np.ndim(z) == 0 else z  # noqa: E731
    return KacRiceIntensities(
        sc(x), sc(y), sc(r1x), sc(r1y), sc(r2), sc(delta), sc(o11), sc(o22), sc(o12)
    )


def scaled_two_point(basis: OrthonormalBasis, n: int, x: float, u):
    """``(n omega(x))^-2 (rho2 - rho1 rho1)`` at ``y = x + u / (n omega(x))``."""
    u = np.asarray(u, dtype=float)
    if np.any(u == 0):
        raise InvalidParameterError("u must be non-zero")
    scale = n * float(equilibrium_density(x))
    res = rho2(basis, n, np.full(u.shape, float(x)), x + u / scale)
    out = (res.rho2 - res.rho1_x * res.rho1_y) / scale**2
    return float(out) if np.ndim(out) == 0 else out


def _omega_extremes(a, b):
    lo = 0.0 if a <= 0.0 <= b else min(abs(a), abs(b))
    hi = max(abs(a), abs(b))
    return float(equilibrium_density(lo)), float(equilibrium_density(hi))


def _integrate_rho1(basis, n, a, b, rtol=1e-3, k=16):
    """Adaptive panel Gauss-Legendre for ``int_a^b rho1``; returns ``(value, error)``.

    Panels are bisected breadth-first (at most ``MAX_LEVELS`` times) until the
    ``k``-point estimate and the two half-panel estimates agree; sums run in
    panel order so the result is independent of scheduling.
    """
    if a == b:
        return 0.0, 0.0
    w_min, w_max = _omega_extremes(a, b)
    panels = max(1, math.ceil((b - a) * n * w_max))
    edges = np.linspace(a, b, panels + 1)
    todo = [(edges[:-1], edges[1:])]
    accepted_val, accepted_err = [], []
    target = None  # absolute, fixed from the first pass
    for level in range(MAX_LEVELS + 1):
        lo, hi = todo.pop()
        mid = 0.5 * (lo + hi)
        xs, ws = gauss_nodes(np.concatenate([lo, lo, mid]), np.concatenate([hi, mid, hi]), k)
        vals = (rho1(basis, n, xs) * ws).sum(axis=1)
        m = lo.size
        whole, halves = vals[:m], vals[m : 2 * m] + vals[2 * m :]
        err = np.abs(whole - halves)
        if target is None:
            target = rtol * abs(halves.sum())
        ok = err <= target * (hi - lo) / (b - a)
        accepted_val.append(halves[ok])
        accepted_err.append(err[ok])
        if ok.all():
            break
        if level == MAX_LEVELS:
            value = float(sum(v.sum() for v in accepted_val) + halves[~ok].sum())
            error = float(sum(e.sum() for e in accepted_err) + err[~ok].sum())
            raise AccuracyNotReachedError(
                "first-intensity quadrature did not converge", partial=value, error_estimate=error
            )
        todo.append((np.concatenate([lo[~ok], mid[~ok]]), np.concatenate([mid[~ok], hi[~ok]])))
    value = float(np.concatenate(accepted_val).sum())
    error = float(np.concatenate(accepted_err).sum())
    return value, error


def expected_count(basis: OrthonormalBasis, n: int, a: float, b: float) -> float:
    """Expected number of real roots in ``[a, b]`` (adaptive quadrature of ``rho1``)."""
    return expected_count_with_error(basis, n, a, b)[0]


def expected_count_with_error(basis, n, a, b):
    if n < 1:
        raise InvalidParameterError("expected_count needs n >= 1")
    if a > b:
        raise InvalidParameterError("need a <= b")
    _check_interval(basis, a, b)
    return _integrate_rho1(basis, n, a, b)


class _Block:
    """Basis tables and diagonal data for a set of nodes."""

    def __init__(self, basis, n, x):
        self.x = x
        tab = eval_basis(basis, n, x, 1)
        self.p, self.dp = tab[0], tab[1]
        self.diag = _Diag(tab)


def _sub(block, idx):
    out = _Block.__new__(_Block)
    out.x = block.x[idx]
    out.p, out.dp = block.p[:, idx], block.dp[:, idx]
    d = _Diag.__new__(_Diag)
    d.K, d.K01, d.K11 = block.diag.K[idx], block.diag.K01[idx], block.diag.K11[idx]
    out.diag = d
    return out


def _pair_correlation(bx, by):
    """``rho2 - rho1 rho1`` on the tensor grid ``bx.x x by.x`` (well separated blocks)."""
    Kxy = bx.p.T @ by.p
    K01xy = bx.p.T @ by.dp
    K01yx = bx.dp.T @ by.p
    K11xy = bx.dp.T @ by.dp
    dx = _Diag.__new__(_Diag)
    dx.K, dx.K01, dx.K11 = bx.diag.K[:, None], bx.diag.K01[:, None], bx.diag.K11[:, None]
    dy = _Diag.__new__(_Diag)
    dy.K, dy.K01, dy.K11 = by.diag.K[None, :], by.diag.K01[None, :], by.diag.K11[None, :]
    r2 = _intensities(dx, dy, Kxy, K01xy, K01yx, K11xy)[0]
    return r2 - dx.rho1() * dy.rho1()


def _pair_correlation_matched(basis, n, x, y):
    r2, r1x, r1y = _matched(basis, n, x, y)[:3]
    return r2 - r1x * r1y


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _double_integral(basis, n, a, b, near_nodes, far_nodes, workers=1):
    """``int int_{[a,b]^2} (rho2 - rho1 rho1)``, twice the part with ``y > x``.

    The half plane ``y > x`` is split into

    * a strip ``0 < y - x <= w`` (``w`` about ``BAND_OSCILLATIONS`` oscillation
      lengths) integrated in ``(x, u)`` coordinates with ``near_nodes`` per
      oscillation length in ``u`` and matched-pair evaluation;
    * small triangles bridging the strip edge and the panel grid;
    * far rectangles between panels ``I`` and ``J > I + band``, evaluated
      as GEMM blocks.

    Partial sums are combined with ``math.fsum`` in a fixed order, so the
    result does not depend on ``workers``.
    """
    w_min, _ = _omega_extremes(a, b)
    osc = 1.0 / (n * w_min)
    panels = max(1, math.ceil((b - a) / osc))
    hp = (b - a) / panels
    band = min(panels, max(1, math.ceil(BAND_OSCILLATIONS * osc / hp)))
    kx = far_nodes
    xi, wxi = panel_nodes(0.0, 1.0, panels, kx)
    xi, wxi = xi.ravel(), wxi.ravel()

    def strip(k):
        us, wu = gauss_nodes(k * hp, (k + 1) * hp, near_nodes)
        length = (b - a) - us
        xs = a + length[:, None] * xi[None, :]
        F = _pair_correlation_matched(basis, n, xs, xs + us[:, None])
        return float(wu @ (F @ wxi * length))

    parts = _map(strip, range(band), workers)

    n_tri = panels - band
    if n_tri > 0:
        far_x, far_w = panel_nodes(a, b, panels, far_nodes)
        far = _Block(basis, n, far_x.ravel())
        w = band * hp
        up, wup = gauss_nodes(0.0, hp, far_nodes)

        def row(i):
            c = a + i * hp
            xs, wx = gauss_nodes(np.full(far_nodes, c), c + hp - up, far_nodes)
            F = _pair_correlation_matched(basis, n, xs, xs + w + up[:, None])
            total = float(wup @ (F * wx).sum(axis=1))
            j0 = i + band + 1
            if j0 < panels:
                kf = far_nodes
                bi = _sub(far, slice(i * kf, (i + 1) * kf))
                bj = _sub(far, slice(j0 * kf, panels * kf))
                total += float(far_w[i] @ _pair_correlation(bi, bj) @ far_w[j0:].ravel())
            return total

        parts += _map(row, range(n_tri), workers)
    return 2.0 * math.fsum(parts)


def variance_count(
    basis: OrthonormalBasis, n: int, a: float, b: float, workers: int = 1
) -> KacRiceResult:
    """Mean and variance of the root count on ``[a, b]`` by Kac-Rice quadrature.

    The error estimate compares the production rule (32 near / 8 far nodes per
    oscillation length) with a coarser one (16 / 6).
    """
    if n < 1:
        raise InvalidParameterError("variance_count needs n >= 1")
    if n > 400:
        raise InvalidParameterError("variance_count is limited to n <= 400")
    if a > b:
        raise InvalidParameterError("need a <= b")
    _check_interval(basis, a, b)
    if a == b:
        return KacRiceResult(a, b, n, 0.0, 0.0, 0.0, 0.0)
    mean, mean_err = _integrate_rho1(basis, n, a, b)
    fine = _double_integral(basis, n, a, b, NEAR_NODES, FAR_NODES, workers)
    coarse = _double_integral(basis, n, a, b, NEAR_NODES // 2, FAR_NODES - 2, workers)
    variance = fine + mean
    err = abs(fine - coarse) + mean_err
    return KacRiceResult(a, b, n, mean, variance, err, variance / n)
