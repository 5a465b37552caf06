"""Composite Gauss-Legendre helpers."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _leggauss(k):
    x, w = np.polynomial.legendre.leggauss(k)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_nodes(lo, hi, k):
    """``k``-point Gauss-Legendre nodes and weights on ``[lo, hi]`` (``lo``, ``hi`` may be arrays)."""
    x, w = _leggauss(k)
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def panel_nodes(a, b, panels, k):
    """Nodes/weights of a composite rule with ``panels`` equal panels, shape ``(panels, k)``."""
    edges = np.linspace(a, b, panels + 1)
    return gauss_nodes(edges[:-1], edges[1:], k)
