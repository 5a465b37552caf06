"""Hermite chaos expansion of the root count and its per-level variances.

In rescaled coordinates the count is ``N = int delta(X_s) |Y_s| v(s) ds`` with
``X`` the standardized process and ``Y`` its standardized, orthogonalized
derivative (independent of ``X`` at the same point).  Expanding

    delta(x) |y| = sum_q f_q(x, y),
    f_q(x, y) = sum_l b_{q-2l} a_{2l} H_{q-2l}(x) H_{2l}(y),

in probabilists' Hermite polynomials splits ``N - E N`` into orthogonal
levels.  The variance of level ``q`` follows from the diagram (Mehler) formula
for four jointly Gaussian variables, a finite sum over tuples
``(d1, d2, d3, d4)`` of products of the four correlation functions.

Conventions
-----------
Hermite polynomials are the *probabilists'* ones (``H_2 = x^2 - 1``), not the
physicists' ``4x^2 - 2``.

``b_0`` is ``H_0(0)/sqrt(2 pi) = 1/sqrt(2 pi)``, the true coefficient of the
delta function, which makes ``E N = (1/pi) int v``.  ``b0="unit"`` selects
``b_0 = 1`` instead.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._quad import gauss_nodes, panel_nodes
from .correlations import correlation_bundle
from .errors import AccuracyNotReachedError, InvalidParameterError
from .kacrice import variance_count
from .orthopoly import OrthonormalBasis, equilibrium_density

HERMITE_MAX = 60
Q_RANGE = (2, 8)
N_MAX = 200
TRUNCATION = 1e-6
B0_CONVENTIONS = ("delta", "unit")

__all__ = [
    "hermite",
    "ChaosCoefficients",
    "coefficients",
    "f_q",
    "TupleSet",
    "enumerate_tuples",
    "mehler_weight",
    "ChaosSpectrum",
    "chaos_spectrum",
    "chaos_variance",
    "ContractionBound",
    "contraction_bound",
]


def hermite(q: int, x):
    """Probabilists' Hermite polynomial ``H_q(x)`` by the three-term recurrence."""
    if int(q) != q or not 0 <= q <= HERMITE_MAX:
        raise InvalidParameterError(f"q must be an integer in 0..{HERMITE_MAX}")
    x = np.asarray(x, dtype=float)
    h_prev, h = np.ones_like(x), x.copy()
    if q == 0:
        out = h_prev
    else:
        for k in range(1, q):
            h_prev, h = h, x * h - k * h_prev
        out = h
    return float(out) if out.ndim == 0 else out


def _hermite_table(q_max, x):
    """``[H_0(x), ..., H_q_max(x)]`` stacked on a new leading axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty((q_max + 1,) + x.shape)
    out[0] = 1.0
    if q_max:
        out[1] = x
    for k in range(1, q_max):
        out[k + 1] = x * out[k] - k * out[k - 1]
    return out


@dataclass(frozen=True)
class ChaosCoefficients:
    """Coefficients of ``delta(x)`` (``b``) and ``|y|`` (``a``), indexed by Hermite degree.

    ``a[k]`` and ``b[k]`` are zero for odd ``k``.
    """

    q_max: int
    a: np.ndarray
    b: np.ndarray
    b0: str = "delta"


def coefficients(q_max: int, b0: str = "delta") -> ChaosCoefficients:
    """Closed-form expansion coefficients up to degree ``q_max``.

    ``a_{2l} = sqrt(2/pi) (-1)^(l+1) / (2^l l! (2l - 1))`` (the ``l = 0`` term
    uses ``2l - 1 = -1``) and ``b_{2k} = H_{2k}(0) / (sqrt(2 pi) (2k)!)``;
    factorials are handled in log space.
    """
    if int(q_max) != q_max or not 0 <= q_max <= HERMITE_MAX:
        raise InvalidParameterError(f"q_max must be an integer in 0..{HERMITE_MAX}")
    if b0 not in B0_CONVENTIONS:
        raise InvalidParameterError(f"b0 must be one of {B0_CONVENTIONS}")
    a = np.zeros(q_max + 1)
    b = np.zeros(q_max + 1)
    for k in range(0, q_max + 1, 2):
        l = k // 2
        log_mag = -l * math.log(2.0) - math.lgamma(l + 1)
        a[k] = math.sqrt(2.0 / math.pi) * (-1.0) ** (l + 1) * math.exp(log_mag) / (2 * l - 1)
        # H_{2l}(0) / (2l)! = (-1)^l (2l-1)!! / (2l)! = (-1)^l / (2^l l!)
        b[k] = (-1.0) ** l * math.exp(log_mag) / math.sqrt(2.0 * math.pi)
    if b0 == "unit":
        b[0] = 1.0
    a.flags.writeable = False
    b.flags.writeable = False
    return ChaosCoefficients(int(q_max), a, b, b0)


def f_q(q: int, x, y, coeffs: ChaosCoefficients | None = None):
    """Level-``q`` term ``sum_l b_{q-2l} a_{2l} H_{q-2l}(x) H_{2l}(y)``."""
    if int(q) != q or q < 0:
        raise InvalidParameterError("q must be a non-negative integer")
    if coeffs is None or coeffs.q_max < q:
        coeffs = coefficients(q, coeffs.b0 if coeffs is not None else "delta")
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    hx, hy = _hermite_table(q, x), _hermite_table(q, y)
    out = np.zeros(x.shape)
    for l in range(q // 2 + 1):
        c = coeffs.b[q - 2 * l] * coeffs.a[2 * l]
        if c:
            out = out + c * hx[q - 2 * l] * hy[2 * l]
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TupleSet:
    """Non-negative ``(d1, d2, d3, d4)`` with row sums ``(q-2l, 2l)`` and column sums ``(q-2l', 2l')``."""

    q: int
    l: int
    lp: int
    tuples: tuple


def enumerate_tuples(q: int, l: int, lp: int) -> TupleSet:
    """All tuples of the diagram sum for levels ``(q - 2l, 2l)`` and ``(q - 2l', 2l')``.

    Brute force over ``d1``; the others follow from the linear constraints.

    >>> enumerate_tuples(2, 0, 1).tuples
    ((0, 2, 0, 0),)
    """
    if not (0 <= 2 * l <= q and 0 <= 2 * lp <= q):
        raise InvalidParameterError("need 0 <= 2l, 2l' <= q")
    out = []
    for d1 in range(q + 1):
        d2 = q - 2 * l - d1
        d3 = q - 2 * lp - d1
        d4 = 2 * l - d3
        if min(d2, d3, d4) < 0 or d2 + d4 != 2 * lp:
            continue
        out.append((d1, d2, d3, d4))
    return TupleSet(q, l, lp, tuple(out))


def mehler_weight(q, l, lp, d):
    """``(q-2l)! (2l)! (q-2l')! (2l')! / (d1! d2! d3! d4!)``, evaluated in log space."""
    lg = math.lgamma
    num = lg(q - 2 * l + 1) + lg(2 * l + 1) + lg(q - 2 * lp + 1) + lg(2 * lp + 1)
    den = sum(lg(k + 1) for k in d)
    return math.exp(num - den)


def _level_terms(q, coeffs):
    """``[(weight, d), ...]`` of the level-``q`` covariance, zero terms dropped."""
    terms = {}
    for l in range(q // 2 + 1):
        cl = coeffs.b[q - 2 * l] * coeffs.a[2 * l]
        if not cl:
            continue
        for lp in range(q // 2 + 1):
            cp = coeffs.b[q - 2 * lp] * coeffs.a[2 * lp]
            if not cp:
                continue
            for d in enumerate_tuples(q, l, lp).tuples:
                terms[d] = terms.get(d, 0.0) + cl * cp * mehler_weight(q, l, lp, d)
    return sorted(terms.items())


def _level_covariance(terms, powers):
    """``E f_q(X_s, Y_s) f_q(X_t, Y_t)`` from precomputed correlation powers."""
    rb, r1, r2, r3 = powers
    out = 0.0
    for (d1, d2, d3, d4), w in terms:
        out = out + w * rb[d1] * r1[d2] * r2[d3] * r3[d4]
    return out


def _powers(bundle, q_max):
    def pw(r):
        out = np.empty((q_max + 1,) + r.shape)
        out[0] = 1.0
        for k in range(1, q_max + 1):
            out[k] = out[k - 1] * r
        return out

    return pw(bundle.rbar), pw(bundle.rtp), pw(bundle.rtp_rev), pw(bundle.rtpp)


@dataclass(frozen=True)
class ChaosSpectrum:
    """Normalized per-level variances.

    Attributes
    ----------
    levels : tuple of int
    values : ndarray
        ``Var(level q) / (c_ab n)`` for each level.
    errors : ndarray
        ``|fine - coarse|`` quadrature differences, same normalization.
    normalization : float
        ``c_ab n`` (the Kac-Rice variance of the count).
    decay_constant : float
        Empirical ``sup |r| (|tau| + 1)`` over the four correlations.
    cutoffs : ndarray
        ``tau`` truncation point used for each level.
    """

    n: int
    interval: tuple
    levels: tuple
    values: np.ndarray
    errors: np.ndarray
    normalization: float
    decay_constant: float
    cutoffs: np.ndarray

    def to_dict(self):
        return {
            "n": self.n,
            "interval": list(self.interval),
            "levels": list(self.levels),
            "values": [float(v) for v in self.values],
            "errors": [float(e) for e in self.errors],
            "normalization": self.normalization,
            "decay_constant": self.decay_constant,
            "cutoffs": [float(c) for c in self.cutoffs],
        }


def _decay_constant(basis, n, A, L, samples=64):
    """Empirical ``sup_{s,t} max|r| (|s - t| + 1)`` on a fixed grid of pairs."""
    s = A + L * (np.arange(samples) + 0.5) / samples
    S, T = np.meshgrid(s, s, indexing="ij")
    bd = correlation_bundle(basis, n, S, T)
    m = np.maximum.reduce([np.abs(bd.rbar), np.abs(bd.rtp), np.abs(bd.rtp_rev), np.abs(bd.rtpp)])
    return float(np.max(m * (np.abs(S - T) + 1.0)))


def _tau_sigma_integral(basis, n, A, L, terms_by_level, cutoffs, k_tau, k_sig, workers):
    """``2 int_0^L dtau int_A^{A+L-tau} v v E[f_q f_q] ds`` for each level, truncated in tau."""
    w_max = float(equilibrium_density(max(abs(A), abs(A + L)) / n))
    width = 0.5 / w_max  # half an oscillation in rescaled units
    t_end = float(min(L, max(cutoffs)))
    panels = max(1, math.ceil(t_end / width))
    edges = np.linspace(0.0, t_end, panels + 1)
    sig_panels = max(1, math.ceil(L * w_max))
    xi, wxi = panel_nodes(0.0, 1.0, sig_panels, k_sig)
    xi, wxi = xi.ravel(), wxi.ravel()
    q_top = max((max(d) for terms in terms_by_level for d, _ in terms), default=0)

    def panel(i):
        taus, wt = gauss_nodes(edges[i], edges[i + 1], k_tau)
        length = L - taus
        s = A + length[:, None] * xi[None, :]
        bd = correlation_bundle(basis, n, s, s + taus[:, None])
        pw = _powers(bd, q_top)
        vv = bd.v_s * bd.v_t
        out = []
        for terms, cut in zip(terms_by_level, cutoffs):
            inner = (_level_covariance(terms, pw) * vv) @ wxi * length
            out.append(float(np.sum(np.where(taus <= cut, wt * inner, 0.0))))
        return out

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(panel, range(panels)))
    else:
        parts = [panel(i) for i in range(panels)]
    return np.array([2.0 * math.fsum(col) for col in zip(*parts)]) if parts else np.zeros(0)


def chaos_spectrum(basis: OrthonormalBasis, n: int, levels, a: float, b: float, *,
                   b0: str = "delta", tol: float = 1e-3, workers: int = 1,
                   normalization: float | None = None) -> ChaosSpectrum:
    """Normalized variance of several chaos levels sharing one set of correlation evaluations.

    The double integral over ``[na, nb]^2`` is written in ``(tau, s)`` with
    ``tau = t - s >= 0`` (the integrand is symmetric).  Level ``q`` is
    truncated where ``B^q / (tau + 1)^q`` drops below ``1e-6``, with ``B`` the
    empirical decay constant of the correlations.  A 16-point rule per half
    oscillation in ``tau`` is compared with an 8-point rule; a difference
    above ``tol`` raises :class:`AccuracyNotReachedError`.
    """
    levels = tuple(int(q) for q in levels)
    if not levels:
        raise InvalidParameterError("no chaos levels requested")
    if any(not Q_RANGE[0] <= q <= Q_RANGE[1] for q in levels):
        raise InvalidParameterError(f"chaos levels must lie in {Q_RANGE[0]}..{Q_RANGE[1]}")
    if not 1 <= n <= N_MAX:
        raise InvalidParameterError(f"chaos_variance supports 1 <= n <= {N_MAX}")
    if not a < b:
        raise InvalidParameterError("need a < b")
    coeffs = coefficients(max(levels), b0)
    if normalization is None:
        normalization = variance_count(basis, n, a, b, workers=workers).variance
    A, L = n * a, n * (b - a)
    B = _decay_constant(basis, n, A, L)
    cutoffs = np.array([B * TRUNCATION ** (-1.0 / q) - 1.0 for q in levels])
    terms = [_level_terms(q, coeffs) for q in levels]
    fine = _tau_sigma_integral(basis, n, A, L, terms, cutoffs, 16, 8, workers)
    coarse = _tau_sigma_integral(basis, n, A, L, terms, cutoffs, 8, 6, workers)
    values = fine / normalization
    errors = np.abs(fine - coarse) / normalization
    if np.any(errors > tol):
        bad = levels[int(np.argmax(errors))]
        raise AccuracyNotReachedError(
            f"chaos level {bad}: quadrature difference {errors.max():.2e} exceeds {tol:g}",
            partial=values, error_estimate=errors,
        )
    return ChaosSpectrum(n, (a, b), levels, values, errors, float(normalization), B, cutoffs)


def chaos_variance(basis: OrthonormalBasis, n: int, q: int, a: float, b: float, **kw) -> float:
    """Variance of chaos level ``q`` divided by the Kac-Rice variance ``c_ab n``."""
    return float(chaos_spectrum(basis, n, [q], a, b, **kw).values[0])


@dataclass(frozen=True)
class ContractionBound:
    closed_form: float
    mc_estimate: float
    mc_std_error: float


def contraction_bound(n: int, length: float = 1.0, samples: int = 1_000_000,
                      seed: int = 0) -> ContractionBound:
    """Decay diagnostic for the fourth-moment contraction integral.

    ``closed_form = 8 length ln^3(n length + 1) / n`` dominates
    ``n^-2 int_{[0, nL]^4} ds dt ds' dt' / ((|s-t|+1)(|s'-t'|+1)(|s-s'|+1)(|t-t'|+1))``,
    which is estimated by plain Monte Carlo with ``samples`` uniform points.
    """
    if n < 10:
        raise InvalidParameterError("contraction_bound needs n >= 10")
    if not length > 0:
        raise InvalidParameterError("length must be positive")
    L = n * length
    closed = 8.0 * length * math.log(L + 1.0) ** 3 / n
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    vals = np.empty(samples)
    step = 250_000
    for lo in range(0, samples, step):
        m = min(step, samples - lo)
        s, t, sp, tp = rng.uniform(0.0, L, size=(4, m))
        vals[lo:lo + m] = 1.0 / (
            (np.abs(s - t) + 1) * (np.abs(sp - tp) + 1) * (np.abs(s - sp) + 1) * (np.abs(t - tp) + 1)
        )
    scale = L**4 / n**2
    return ContractionBound(closed, scale * float(vals.mean()),
                            scale * float(vals.std(ddof=1)) / math.sqrt(samples))
