"""Calibration of the first-intensity scale against Monte Carlo root counts.

Run as ``python -m rootclt.calibrate``; prints the table recorded in
:mod:`rootclt.constants`.
"""

import argparse
import math

from .constants import MEAN_INTENSITY_SCALE
from .kacrice import expected_count
from .montecarlo import SimulationConfig, run_experiment
from .orthopoly import make_family

FAMILIES = (("chebyshev1", {}), ("legendre", {}), ("jacobi", {"alpha": 0.5, "beta": 0.5}))


def calibrate(n=50, trials=100_000, seed=20240601, interval=(-0.5, 0.5), workers=1):
    """Rows ``(family, integral, mc_mean, mc_se, z_unit, z_over_pi)``.

    ``integral`` is the quadrature of the radicand form with unit scale; the
    ``z`` columns compare the Monte Carlo mean with scale ``1`` and ``1/pi``.
    """
    rows = []
    for fam, params in FAMILIES:
        basis = make_family(fam, **params)
        integral = expected_count(basis, n, *interval) / MEAN_INTENSITY_SCALE
        run = run_experiment(SimulationConfig(fam, n, interval, trials, seed, params), workers)
        se = run.std_error
        rows.append((basis.name, integral, run.mean, se,
                     (run.mean - integral) / se, (run.mean - integral / math.pi) / se))
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args(argv)
    print(f"{'family':26s} {'integral':>9s} {'MC mean':>9s} {'MC s.e.':>8s} "
          f"{'z(1)':>7s} {'z(1/pi)':>8s}")
    for name, integral, mean, se, z1, zpi in calibrate(args.n, args.trials, args.seed,
                                                       workers=args.workers):
        print(f"{name:26s} {integral:9.4f} {mean:9.4f} {se:8.4f} {z1:7.2f} {zpi:8.1f}")


if __name__ == "__main__":
    main()
