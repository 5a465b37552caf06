import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import roots_jacobi

from rootclt.errors import InvalidParameterError, NearDiagonalError
from rootclt.orthopoly import (
    DEGREE_CAP,
    equilibrium_density,
    equilibrium_mass,
    eval_basis,
    kernel,
    kernel_cd,
    kernel_matrix,
    kernel_pairs,
    make_family,
)


def test_chebyshev_closed_form(cheb):
    theta = np.linspace(0.1, 3.0, 7)
    x = np.cos(theta)
    p = eval_basis(cheb, 6, x)[0]
    assert np.allclose(p[0], 1 / math.sqrt(math.pi), rtol=1e-14)
    for j in range(1, 7):
        assert np.allclose(p[j], math.sqrt(2 / math.pi) * np.cos(j * theta), atol=1e-13)


def test_legendre_endpoint_values(leg):
    p = eval_basis(leg, 20, 1.0)[0]
    assert np.allclose(p, np.sqrt((2 * np.arange(21) + 1) / 2), rtol=1e-13)


def test_spot_values(cheb, leg):
    assert eval_basis(cheb, 4, 0.0)[0, 4] == pytest.approx(math.sqrt(2 / math.pi), rel=1e-14)
    assert eval_basis(leg, 2, 0.0)[0, 2] == pytest.approx(-0.5 * math.sqrt(2.5), rel=1e-14)


def test_constant_has_zero_derivatives(family):
    tab = eval_basis(family, 5, np.array([-0.3, 0.2]), max_deriv=4)
    assert np.all(tab[1:, 0] == 0.0)


@pytest.mark.parametrize("kind,params", [
    ("chebyshev1", {}), ("legendre", {}), ("jacobi", {"alpha": 0.5, "beta": -0.3}),
    ("jacobi", {"alpha": 2.0, "beta": 1.0}), ("gegenbauer", {"lam": 1.5}),
    ("gegenbauer", {"lam": 0.25}),
])
def test_orthonormality_against_gauss_jacobi(kind, params):
    basis = make_family(kind, **params)
    x, w = roots_jacobi(80, basis.alpha, basis.beta)
    p = eval_basis(basis, 30, x)[0]
    gram = (p * w) @ p.T
    assert np.max(np.abs(gram - np.eye(31))) <= 1e-10


def test_leading_coefficients_positive(family):
    logs = family.log_leading_coeffs(200)
    assert np.all(np.isfinite(logs))
    # derivative of order j of p_j is j! * gamma_j
    tab = eval_basis(family, 6, 0.3, max_deriv=6)
    for j in range(1, 7):
        assert tab[j, j] == pytest.approx(math.factorial(j) * math.exp(logs[j]), rel=1e-11)


def test_equilibrium_density_normalized():
    # substitute x = sin(phi) to remove the endpoint singularity
    phi, w = np.polynomial.legendre.leggauss(64)
    phi = phi * math.pi / 2
    total = np.sum(w * math.pi / 2 * equilibrium_density(np.sin(phi)) * np.cos(phi))
    assert total == pytest.approx(1.0, abs=1e-8)
    assert equilibrium_mass(-1.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert equilibrium_mass(-0.5, 0.5) == pytest.approx(1 / 3, abs=1e-15)


def test_derivatives_match_finite_differences(family):
    x, h = 0.37, 1e-5
    tab = eval_basis(family, 12, x, max_deriv=2)
    plus = eval_basis(family, 12, x + h)[0]
    minus = eval_basis(family, 12, x - h)[0]
    assert np.allclose(tab[1], (plus - minus) / (2 * h), rtol=1e-6, atol=1e-6)
    assert np.allclose(tab[2], (plus - 2 * tab[0] + minus) / h**2, rtol=1e-3, atol=1e-3)


def test_kernel_examples(cheb, leg, family):
    assert kernel(cheb, 4, 0.0, 0.0) == pytest.approx(5 / math.pi, rel=1e-14)
    assert kernel(leg, 3, 1.0, 1.0) == pytest.approx(8.0, rel=1e-14)
    c = kernel(family, 0, -0.4, 0.7)
    assert c == pytest.approx(family.p0**2, rel=1e-14)
    assert kernel(family, 0, 0.1, 0.2) == c


@settings(max_examples=60, deadline=None)
@given(x=st.floats(-0.99, 0.99), y=st.floats(-0.99, 0.99),
       l=st.integers(0, 2), m=st.integers(0, 2), n=st.integers(0, 60))
def test_kernel_symmetry_bit_exact(x, y, l, m, n):
    basis = make_family("jacobi", alpha=0.3, beta=-0.6)
    assert kernel(basis, n, x, y, l, m) == kernel(basis, n, y, x, m, l)


def test_kernel_cd_examples(cheb, leg):
    assert kernel_cd(cheb, 10, 0.3, -0.2) == pytest.approx(kernel(cheb, 10, 0.3, -0.2), rel=1e-9)
    assert kernel_cd(leg, 5, 0.9, 0.1) == pytest.approx(kernel(leg, 5, 0.9, 0.1), rel=1e-9)


def test_kernel_cd_two_terms(family):
    x, y = 0.4, -0.25
    p = eval_basis(family, 1, np.array([x, y]))[0]
    direct = p[0, 0] * p[0, 1] + p[1, 0] * p[1, 1]
    assert kernel_cd(family, 1, x, y) == pytest.approx(direct, rel=1e-13)


def test_kernel_cd_random_pairs(family):
    rng = np.random.default_rng(3)
    for _ in range(1000):
        n = int(rng.integers(1, 501))
        x, y = rng.uniform(-0.98, 0.98, 2)
        if abs(x - y) < 1e-4:
            continue
        direct = kernel(family, n, x, y)
        assert abs(kernel_cd(family, n, x, y) - direct) <= 1e-9 * abs(direct)


def test_kernel_cd_guard(cheb):
    with pytest.raises(NearDiagonalError):
        kernel_cd(cheb, 10, 0.3, 0.3 + 1e-9)
    with pytest.raises(InvalidParameterError):
        kernel_cd(cheb, 0, 0.3, 0.1)


def test_vectorised_kernels_agree(family):
    x = np.array([-0.5, 0.0, 0.6])
    y = np.array([0.2, -0.7, 0.6])
    pairs = kernel_pairs(family, 40, x, y, orders=((0, 0), (1, 2)))
    mat = kernel_matrix(family, 40, x, y, 1, 2)
    for i in range(3):
        assert pairs[(0, 0)][i] == pytest.approx(kernel(family, 40, x[i], y[i]), rel=1e-12)
        assert pairs[(1, 2)][i] == pytest.approx(kernel(family, 40, x[i], y[i], 1, 2), rel=1e-12)
        assert mat[i, i] == pytest.approx(pairs[(1, 2)][i], rel=1e-12)


@pytest.mark.parametrize("kind", ["chebyshev1", "legendre"])
def test_off_diagonal_kernel_decay(kind):
    """``|K^{(l,m)}(x,y)| (|x-y| + 1/n) / n^(l+m+1)`` stays bounded as n grows."""
    basis = make_family(kind)
    g = np.linspace(-0.6, 0.6, 200)
    X, Y = np.meshgrid(g, g, indexing="ij")
    for l, m in [(0, 0), (0, 1), (1, 1), (0, 2)]:
        sups = []
        for n in (100, 500):
            K = kernel_matrix(basis, n, g, g, l, m)
            sups.append(np.max(np.abs(K) * (np.abs(X - Y) + 1 / n)) / n ** (l + m))
        assert 0.2 <= sups[1] / sups[0] <= 5.0


def test_normalized_derivative_sums_bounded(cheb):
    """``sum_j (d^k/dt^k p_j(t/n))^2 / K(t/n, t/n)`` stays bounded in n for k <= 3."""
    sups = {}
    for n in (100, 400):
        x = np.linspace(-0.5, 0.5, 201)
        tab = eval_basis(cheb, n, x, max_deriv=3)
        K = np.sum(tab[0] ** 2, axis=0)
        sups[n] = [np.max(np.sum(tab[k] ** 2, axis=0) / (n ** (2 * k) * K)) for k in range(4)]
    for k in range(4):
        assert sups[400][k] < 2.0 * sups[100][k]


def test_parameter_validation():
    with pytest.raises(InvalidParameterError):
        make_family("jacobi", alpha=-1.0, beta=0.0)
    with pytest.raises(InvalidParameterError):
        make_family("gegenbauer", lam=-0.5)
    with pytest.raises(InvalidParameterError):
        make_family("hermite")
    basis = make_family("gegenbauer", **{"lambda": 1.0})
    assert basis.alpha == basis.beta == 0.5
    with pytest.raises(InvalidParameterError):
        eval_basis(basis, -1, 0.0)
    with pytest.raises(InvalidParameterError):
        eval_basis(basis, 3, 0.0, max_deriv=-1)
    with pytest.raises(InvalidParameterError):
        eval_basis(basis, DEGREE_CAP + 1, 0.0)


def test_high_degree_stays_finite(cheb):
    p = eval_basis(cheb, DEGREE_CAP, np.array([0.3]))[0, :, 0]
    theta = math.acos(0.3)
    assert p[-1] == pytest.approx(math.sqrt(2 / math.pi) * math.cos(DEGREE_CAP * theta), abs=1e-9)
