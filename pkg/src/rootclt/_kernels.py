"""Compiled inner loops for matched point pairs.

The second Kac-Rice intensity at nearby points ``x, y = x + u`` loses all its
digits if it is assembled from ``K(x,x) K(y,y) - K(x,y)^2`` and friends.  The
conditioning event ``P(x) = P(y) = 0`` is the same as ``P[x] = P[x,y] = 0``
(divided differences), and given it the derivatives are

    P'(x) = -u P[x,x,y],     P'(y) = u P[x,y,y] = u (P[x,x,y] + u P[x,x,y,y]).

Divided differences of the orthonormal polynomials follow from the Leibniz
rule applied to the three-term recurrence, with no subtraction of nearby
values, so every Gram entry below is computed to full relative accuracy.
"""

import numba as nb
import numpy as np

# column layout of pair_stats output
AA, AB, BB, AC, BC, AE, BE, CC, CE, EE, KXX, K01XX, K11XX, KYY, K01YY, K11YY = range(16)


@nb.njit(cache=True, nogil=True)
def pair_stats(A, B, C, p0, x, y):
    """Gram entries of ``a = p[x], b = p[x,y], c = p[x,x,y], e = p[x,x,y,y]``
    plus the diagonal kernels at ``x`` and ``y``; shape ``(16, len(x))``."""
    m = x.shape[0]
    n = A.shape[0]
    out = np.zeros((16, m))
    for i in range(m):
        xi = x[i]
        yi = y[i]
        px, py = p0, p0
        dpx, dpy, pxy, pxxy, pxyy, pxxyy = 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
        qx, qy = 0.0, 0.0
        dqx, dqy, qxy, qxxy, qxyy, qxxyy = 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
        s = np.zeros(16)
        for j in range(n + 1):
            s[AA] += px * px
            s[AB] += px * pxy
            s[BB] += pxy * pxy
            s[AC] += px * pxxy
            s[BC] += pxy * pxxy
            s[AE] += px * pxxyy
            s[BE] += pxy * pxxyy
            s[CC] += pxxy * pxxy
            s[CE] += pxxy * pxxyy
            s[EE] += pxxyy * pxxyy
            s[KXX] += px * px
            s[K01XX] += px * dpx
            s[K11XX] += dpx * dpx
            s[KYY] += py * py
            s[K01YY] += py * dpy
            s[K11YY] += dpy * dpy
            if j == n:
                break
            a, b, c = A[j], B[j], C[j]
            fx = a * xi + b
            fy = a * yi + b
            npx = fx * px - c * qx
            npy = fy * py - c * qy
            ndpx = fx * dpx + a * px - c * dqx
            ndpy = fy * dpy + a * py - c * dqy
            npxy = fx * pxy + a * py - c * qxy
            npxxy = fx * pxxy + a * pxy - c * qxxy
            npxyy = fx * pxyy + a * dpy - c * qxyy
            npxxyy = fx * pxxyy + a * pxyy - c * qxxyy
            qx, qy, dqx, dqy, qxy, qxxy, qxyy, qxxyy = px, py, dpx, dpy, pxy, pxxy, pxyy, pxxyy
            px, py, dpx, dpy, pxy, pxxy, pxyy, pxxyy = npx, npy, ndpx, ndpy, npxy, npxxy, npxyy, npxxyy
        for k in range(16):
            out[k, i] = s[k]
    return out


@nb.njit(cache=True, nogil=True)
def series_value(A, B, C, p0, coef, x):
    """``(H(x), H'(x))`` for ``H = sum coef_j p_j`` by the three-term recurrence."""
    n = A.shape[0]
    p, dp = p0, 0.0
    q, dq = 0.0, 0.0
    h = coef[0] * p
    dh = 0.0
    for j in range(n):
        f = A[j] * x + B[j]
        np_ = f * p - C[j] * q
        ndp = f * dp + A[j] * p - C[j] * dq
        q, dq = p, dp
        p, dp = np_, ndp
        h += coef[j + 1] * p
        dh += coef[j + 1] * dp
    return h, dh
