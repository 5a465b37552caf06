"""Monte Carlo sampling of Gaussian random orthogonal polynomials and root counting.

Trial ``i`` of a run draws from its own Philox stream keyed on
``(master_seed, i)``, so a trial's outcome never depends on scheduling.
Counting evaluates ``H = xi @ table`` on a uniform grid fine enough that every
stretch of length ``1 / (n max omega)`` holds at least ``G`` points, and
counts strict sign changes.  Cells where ``H'`` changes sign but ``H`` does
not are screened for a hidden pair of roots.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from ._kernels import series_value
from .errors import DegenerateInputError, InsufficientDataError, InvalidParameterError
from .orthopoly import OrthonormalBasis, eval_basis, equilibrium_density, make_family

CHUNK = 256
EDGE_MARGIN = 0.01
KS_TERMS = 100
BOOTSTRAP_RESAMPLES = 1000
# cubic screen: a cell is checked exactly when the interpolated extremum comes
# within this fraction of the larger endpoint value
SCREEN_RATIO = 1e-2


def trial_generator(master_seed: int, trial_index: int) -> np.random.Generator:
    """Counter-based generator for one trial, keyed on ``(master_seed, trial_index)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial_index),))
    return np.random.Generator(np.random.Philox(ss))


def sample_coefficients(n: int, seed: int, trial_index: int = 0) -> np.ndarray:
    """Standard Gaussian coefficient vector of length ``n + 1`` for one trial."""
    if n < 0:
        raise InvalidParameterError("n must be non-negative")
    return trial_generator(seed, trial_index).standard_normal(n + 1)


def _trial_draws(n, master_seed, indices):
    """Coefficients and one continuity jitter per trial (same stream, fixed order)."""
    xi = np.empty((len(indices), n + 1))
    jitter = np.empty(len(indices))
    for row, i in enumerate(indices):
        g = trial_generator(master_seed, i)
        xi[row] = g.standard_normal(n + 1)
        jitter[row] = g.uniform(-0.5, 0.5)
    return xi, jitter


class RootCounter:
    """Grid tables for counting roots of many polynomials on one interval.

    Parameters
    ----------
    basis, n : family and degree
    a, b : interval ends
    grid_factor : int
        Minimum number of grid points per ``1 / (n max omega)``.
    """

    def __init__(self, basis: OrthonormalBasis, n: int, a: float, b: float, grid_factor: int = 8):
        if n < 1:
            raise InvalidParameterError("count_roots needs n >= 1")
        if not a < b:
            raise InvalidParameterError("need a < b")
        lo, hi = basis.support
        if not (lo < a and b < hi):
            raise InvalidParameterError("interval must lie strictly inside the support")
        if grid_factor < 1:
            raise InvalidParameterError("grid_factor must be positive")
        self.basis, self.n, self.a, self.b = basis, n, float(a), float(b)
        w_max = float(np.max(equilibrium_density(np.array([a, b, 0.0 if a < 0 < b else a]))))
        cells = max(1, math.ceil(grid_factor * (b - a) * n * w_max))
        self.x = np.linspace(a, b, cells + 1)
        self.h = (b - a) / cells
        tab = eval_basis(basis, n, self.x, 1)
        self.P = np.ascontiguousarray(tab[0])
        self.dP = np.ascontiguousarray(tab[1])
        self.rec = basis.recurrence(n)

    def _value(self, coef, x):
        A, B, C = self.rec
        return series_value(A, B, C, self.basis.p0, coef, x)

    def _screen(self, H0, H1, D0, D1):
        """Cubic Hermite screen for cells where ``H'`` flips but ``H`` does not.

        The interpolant's derivative takes the endpoint values ``D0``, ``D1``
        of opposite sign, so it has exactly one zero in the cell; the cell is
        cleared when the interpolated extremum keeps the sign of ``H`` with a
        clear margin.  Returns a boolean mask of cells needing the exact check.
        """
        d0, d1 = D0 * self.h, D1 * self.h
        c2 = 3 * (H1 - H0) - 2 * d0 - d1
        c3 = 2 * (H0 - H1) + d0 + d1
        lo, hi = np.zeros_like(H0), np.ones_like(H0)
        neg0 = d0 < 0
        for _ in range(40):
            t = 0.5 * (lo + hi)
            move_lo = ((d0 + t * (2 * c2 + 3 * c3 * t)) < 0) == neg0
            lo = np.where(move_lo, t, lo)
            hi = np.where(move_lo, hi, t)
        t = 0.5 * (lo + hi)
        ext = H0 + t * (d0 + t * (c2 + c3 * t))
        big = np.maximum(np.abs(H0), np.abs(H1))
        cleared = (np.signbit(ext) == np.signbit(H0)) & (np.abs(ext) > SCREEN_RATIO * big)
        return ~cleared

    def _hidden_pair(self, coef, k, H0, D0):
        """Exact check: bisection on ``H'`` for the critical point, then the sign of ``H``."""
        lo, hi = self.x[k], self.x[k + 1]
        neg = D0 < 0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if (self._value(coef, mid)[1] < 0) == neg:
                lo = mid
            else:
                hi = mid
        hc = self._value(coef, 0.5 * (lo + hi))[0]
        return np.signbit(hc) != np.signbit(H0)

    def count(self, xi) -> np.ndarray:
        """Root counts for each row of ``xi`` (shape ``(trials, n + 1)`` or ``(n + 1,)``)."""
        xi = np.asarray(xi, dtype=float)
        single = xi.ndim == 1
        xi = np.atleast_2d(xi)
        if xi.shape[1] != self.n + 1:
            raise InvalidParameterError(f"expected {self.n + 1} coefficients, got {xi.shape[1]}")
        if np.any(~xi.any(axis=1)):
            raise DegenerateInputError("all-zero coefficient vector")
        H = xi @ self.P
        D = xi @ self.dP
        zt, zk = np.nonzero(H == 0.0)
        for t, k in zip(zt, zk):
            shift = self.h * 1e-6 if k < len(self.x) - 1 else -self.h * 1e-6
            H[t, k] = self._value(xi[t], self.x[k] + shift)[0]
        S = np.signbit(H)
        flips = S[:, 1:] != S[:, :-1]
        counts = flips.sum(axis=1)
        dflips = np.signbit(D[:, 1:]) != np.signbit(D[:, :-1])
        ct, ck = np.nonzero(dflips & ~flips)
        suspect = self._screen(H[ct, ck], H[ct, ck + 1], D[ct, ck], D[ct, ck + 1])
        for t, k in zip(ct[suspect], ck[suspect]):
            if self._hidden_pair(xi[t], k, H[t, k], D[t, k]):
                counts[t] += 2
        return int(counts[0]) if single else counts

    def brackets(self, xi, refine_tol: float = 1e-13):
        """Sign-change brackets of one polynomial refined by bisection to ``refine_tol``."""
        xi = np.asarray(xi, dtype=float)
        H = xi @ self.P
        S = np.signbit(H)
        out = []
        for k in np.nonzero(S[1:] != S[:-1])[0]:
            lo, hi = self.x[k], self.x[k + 1]
            slo = S[k]
            while hi - lo > refine_tol:
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if np.signbit(self._value(xi, mid)[0]) == slo:
                    lo = mid
                else:
                    hi = mid
            out.append((lo, hi))
        return out


def count_roots(basis, n, xi, a, b, G=8, refine_tol=1e-13) -> int:
    """Number of real roots of ``sum xi_j p_j`` in ``[a, b]``.

    ``refine_tol`` only matters for :meth:`RootCounter.brackets`; the count
    comes from the sign-change scan.
    """
    return RootCounter(basis, n, a, b, G).count(xi)


def ks_test(samples):
    """One-sample Kolmogorov-Smirnov test against N(0, 1).

    The p-value is the asymptotic Kolmogorov tail ``Q(sqrt(m) D)`` with the
    alternating series truncated at 100 terms (the dual theta series is used
    below ``lambda = 0.3`` where the alternating one converges slowly).
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m < 50:
        raise InsufficientDataError(f"KS test needs at least 50 samples, got {m}")
    cdf = stats.norm.cdf(x)
    i = np.arange(1, m + 1)
    d = float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))
    return d, kolmogorov_tail(math.sqrt(m) * d)


def kolmogorov_tail(lam):
    """``P(K > lam)`` for the Kolmogorov distribution."""
    if lam <= 0:
        return 1.0
    k = np.arange(1, KS_TERMS + 1)
    if lam < 0.3:
        odd = 2 * k - 1
        cdf = math.sqrt(2 * math.pi) / lam * np.exp(-(odd**2) * math.pi**2 / (8 * lam * lam)).sum()
        return float(min(1.0, max(0.0, 1.0 - cdf)))
    terms = 2.0 * (-1.0) ** (k - 1) * np.exp(-2.0 * k * k * lam * lam)
    return float(min(1.0, max(0.0, terms.sum())))


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters of a Monte Carlo run."""

    family: str
    n: int
    interval: tuple
    trials: int
    master_seed: int
    params: dict = field(default_factory=dict)
    grid_factor: int = 8
    refine_tol: float = 1e-13

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        object.__setattr__(self, "interval", (a, b))
        if int(self.trials) != self.trials or self.trials < 1:
            raise InvalidParameterError("trials must be a positive integer")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameterError("n must be a positive integer")
        if self.grid_factor < 4:
            raise InvalidParameterError("grid_factor must be at least 4")
        if not (-1.0 + EDGE_MARGIN - 1e-12 <= a < b <= 1.0 - EDGE_MARGIN + 1e-12):
            raise InvalidParameterError(
                f"interval must satisfy -0.99 <= a < b <= 0.99, got [{a}, {b}]"
            )
        if not 0 <= int(self.master_seed) < 2**64:
            raise InvalidParameterError("master_seed must be an unsigned 64-bit integer")

    def basis(self):
        return make_family(self.family, **self.params)

    def to_dict(self):
        d = asdict(self)
        d["interval"] = list(self.interval)
        return d


@dataclass
class SimulationRun:
    """Outcome of :func:`run_experiment`.

    ``ks_stat``/``ks_pvalue`` test the standardized counts after adding the
    per-trial ``Uniform(-1/2, 1/2)`` jitter (counts are integers, and a KS
    test of lattice data against a continuous law rejects at any size).
    ``reference_*`` fields standardize by a supplied mean and variance, such
    as the Kac-Rice values, instead of the sample moments.
    """

    config: SimulationConfig
    counts: np.ndarray
    mean: float
    variance: float | None
    standardized: np.ndarray | None
    ks_stat: float | None
    ks_pvalue: float | None
    skewness: float | None
    excess_kurtosis: float | None
    wall_time: float
    reference_ks_stat: float | None = None
    reference_ks_pvalue: float | None = None

    @property
    def std_error(self):
        return None if self.variance is None else math.sqrt(self.variance / len(self.counts))

    def summary(self):
        """JSON-ready dict without per-trial arrays or timing."""
        n = self.config.n
        return {
            "config": self.config.to_dict(),
            "mean": self.mean,
            "mean_std_error": self.std_error,
            "variance": self.variance,
            "variance_over_n": None if self.variance is None else self.variance / n,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "ks_stat": self.ks_stat,
            "ks_pvalue": self.ks_pvalue,
            "reference_ks_stat": self.reference_ks_stat,
            "reference_ks_pvalue": self.reference_ks_pvalue,
        }


def _simulate(config, workers):
    basis = config.basis()
    a, b = config.interval
    counter = RootCounter(basis, config.n, a, b, config.grid_factor)
    starts = list(range(0, config.trials, CHUNK))

    def chunk(s):
        idx = range(s, min(s + CHUNK, config.trials))
        xi, jit = _trial_draws(config.n, config.master_seed, idx)
        return counter.count(xi), jit

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    counts = np.concatenate([p[0] for p in parts]).astype(np.int64)
    jitter = np.concatenate([p[1] for p in parts])
    return counts, jitter


def run_experiment(config: SimulationConfig, workers: int = 1, reference=None) -> SimulationRun:
    """Run all trials of ``config``.

    Parameters
    ----------
    workers : int
        Thread count; results are identical for every value.
    reference : (mean, variance), optional
        Theoretical moments (e.g. Kac-Rice quadrature) for the auxiliary
        standardization ``(N - E N) / sqrt(Var N)``.
    """
    t0 = time.perf_counter()
    counts, jitter = _simulate(config, workers)
    mean = float(counts.mean())
    variance = std = None
    standardized = ks = p = skew = kurt = None
    if config.trials >= 2:
        variance = float(counts.var(ddof=1))
    if variance:
        std = math.sqrt(variance)
        standardized = (counts - mean) / std
        skew = float(stats.skew(counts))
        kurt = float(stats.kurtosis(counts))
        if config.trials >= 50:
            smooth = counts + jitter
            ks, p = ks_test((smooth - mean) / math.sqrt(variance + 1.0 / 12.0))
    rks = rp = None
    if reference is not None and config.trials >= 50:
        rmean, rvar = reference
        rks, rp = ks_test((counts + jitter - rmean) / math.sqrt(rvar + 1.0 / 12.0))
    return SimulationRun(
        config, counts, mean, variance, standardized, ks, p, skew, kurt,
        time.perf_counter() - t0, rks, rp,
    )


def bootstrap_variance_se(counts, seed, resamples=BOOTSTRAP_RESAMPLES):
    """Bootstrap standard error of the unbiased sample variance."""
    counts = np.asarray(counts, dtype=float)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    idx = rng.integers(0, counts.size, size=(resamples, counts.size))
    return float(counts[idx].var(axis=1, ddof=1).std(ddof=1))


def variance_slope(basis_or_family, interval, n_list, trials, master_seed=0, workers=1,
                   grid_factor=8, params=None):
    """``[(n, Var/n, bootstrap s.e. of Var/n), ...]`` for each degree in ``n_list``."""
    n_list = list(n_list)
    if len(n_list) < 2:
        raise InvalidParameterError("n_list needs at least two degrees")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise InvalidParameterError("n_list must be increasing")
    if isinstance(basis_or_family, OrthonormalBasis):
        family, params = basis_or_family.kind.value, dict(basis_or_family.params)
    else:
        family, params = str(basis_or_family), dict(params or {})
    out = []
    for n in n_list:
        cfg = SimulationConfig(family, n, tuple(interval), trials, master_seed, params, grid_factor)
        run = run_experiment(cfg, workers)
        se = bootstrap_variance_se(run.counts, master_seed + n)
        out.append((n, run.variance / n, se / n))
    return out
