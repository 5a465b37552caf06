"""Resolved conventions that were fixed empirically.

MEAN_INTENSITY_SCALE
    Factor multiplying the Kac-Rice first intensity
    ``rho_1(x) = (1/pi) sqrt(K11/K - (K01/K)^2)`` to obtain the expected number
    of roots per unit length.  Two readings were possible: ``1`` (``rho_1`` is
    already the root density) and ``1/pi`` (an extra prefactor on the
    integral).  The calibration below picked ``1``.

    Calibration log (``python -m rootclt.calibrate``; n = 50, 100000 trials,
    master seed 20240601, interval [-0.5, 0.5], grid factor 8)::

        family                      integral   MC mean  MC s.e.    z(1)  z(1/pi)
        chebyshev1                    9.7153    9.7147   0.0068   -0.10    979.1
        legendre                      9.8142    9.8141   0.0068   -0.01    984.9
        jacobi(alpha=0.5,beta=0.5)    9.9120    9.9120   0.0068    0.01    988.5

    ``z`` is (MC mean - prediction) / s.e. under each scale.

ARCSIN_ARGUMENT
    The two-point intensity uses ``arcsin(Omega12 / sqrt(Omega11 Omega22))``,
    the conditional correlation of the two derivatives.  Validated against
    Monte Carlo root-count variances in ``tests/test_kacrice.py``.
"""

MEAN_INTENSITY_SCALE = 1.0
ARCSIN_ARGUMENT = "omega12"
