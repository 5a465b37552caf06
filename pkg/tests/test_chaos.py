import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rootclt.chaos import (
    chaos_spectrum,
    chaos_variance,
    coefficients,
    contraction_bound,
    enumerate_tuples,
    f_q,
    hermite,
    mehler_weight,
)
from rootclt.errors import AccuracyNotReachedError, InvalidParameterError
from rootclt.kacrice import variance_count
from rootclt.orthopoly import eval_basis


def test_hermite_examples():
    assert hermite(2, 2.0) == 3.0
    assert hermite(3, 1.0) == -2.0
    assert hermite(4, 0.0) == 3.0
    assert hermite(0, 5.0) == 1.0
    with pytest.raises(InvalidParameterError):
        hermite(61, 0.0)


def test_hermite_is_probabilists_convention():
    x = np.linspace(-3, 3, 13)
    assert np.allclose(hermite(2, x), x * x - 1)
    assert np.allclose(hermite(4, x), x**4 - 6 * x * x + 3)


def test_hermite_orthogonality():
    x, w = np.polynomial.legendre.leggauss(200)
    x, w = 12 * x, 12 * w
    g = w * np.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    H = np.array([hermite(q, x) for q in range(11)])
    gram = (H * g) @ H.T
    norms = np.array([math.factorial(q) for q in range(11)], dtype=float)
    assert np.allclose(np.diag(gram), norms, rtol=1e-8)
    off = gram - np.diag(np.diag(gram))
    assert np.max(np.abs(off) / np.sqrt(np.outer(norms, norms))) <= 1e-8


def test_coefficient_examples():
    c = coefficients(8)
    assert c.a[0] == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)
    assert c.a[2] == pytest.approx(math.sqrt(2 / math.pi) / 2, rel=1e-15)
    assert c.b[2] == pytest.approx(-1 / (2 * math.sqrt(2 * math.pi)), rel=1e-15)
    assert np.all(c.b[1::2] == 0.0)
    assert c.b[0] == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert coefficients(8, b0="unit").b[0] == 1.0
    with pytest.raises(InvalidParameterError):
        coefficients(4, b0="other")


def test_coefficients_against_hermite_at_zero():
    c = coefficients(20)
    for k in range(0, 21, 2):
        ref = hermite(k, 0.0) / (math.sqrt(2 * math.pi) * math.factorial(k))
        assert c.b[k] == pytest.approx(ref, rel=1e-13)
    for l in range(11):
        ref = math.sqrt(2 / math.pi) * (-1) ** (l + 1) / (2**l * math.factorial(l) * (2 * l - 1))
        assert c.a[2 * l] == pytest.approx(ref, rel=1e-13)


def test_absolute_value_expansion_reproduces_moment():
    # sum_l a_{2l} H_{2l}(y) -> |y|; its projection on H_2 gives E|Z|(Z^2-1) / 2! = a_2
    rng = np.random.default_rng(0)
    z = rng.standard_normal(400_000)
    c = coefficients(2)
    est = np.mean(np.abs(z) * (z * z - 1)) / 2
    se = np.std(np.abs(z) * (z * z - 1)) / 2 / math.sqrt(z.size)
    assert abs(est - c.a[2]) <= 4 * se


def test_hermite_parseval_partial_sums_increase():
    c = coefficients(40)
    terms = np.array([c.b[k] ** 2 * math.factorial(k) for k in range(0, 41, 2)])
    assert np.all(terms > 0)
    assert np.all(np.diff(np.cumsum(terms)) > 0)


def test_hermite_parseval_tail_negligible():
    """Tail ``k in (30, 40]`` of ``sum b_k^2 k!`` below 1e-6 of the total.

    Expected to fail: ``b_{2k}^2 (2k)! ~ 1 / (2 pi sqrt(pi k))``, so the
    series diverges and the tail is about 5% of the partial sum.
    """
    c = coefficients(40)
    terms = {k: c.b[k] ** 2 * math.factorial(k) for k in range(0, 41, 2)}
    total = sum(terms.values())
    tail = sum(v for k, v in terms.items() if k > 30)
    assert tail < 1e-6 * total, f"tail/total = {tail / total:.3g}"


def test_f_q_examples():
    unit = coefficients(4, b0="unit")
    assert f_q(0, 0.3, -1.2, unit) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)
    a0, a2 = math.sqrt(2 / math.pi), math.sqrt(2 / math.pi) / 2
    b2 = -1 / (2 * math.sqrt(2 * math.pi))
    assert f_q(2, 0.0, 0.0, unit) == pytest.approx(-b2 * a0 - a2, rel=1e-14)
    delta = coefficients(4)
    assert f_q(2, 0.0, 0.0, delta) == pytest.approx(-b2 * a0 - a2 / math.sqrt(2 * math.pi), rel=1e-14)


def test_odd_levels_vanish():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(2, 100)) * 2
    for q in (1, 3, 5, 7):
        assert np.all(f_q(q, x, y) == 0.0)


@pytest.mark.parametrize("q,l,lp,expected", [
    (2, 0, 0, {(2, 0, 0, 0)}),
    (2, 1, 1, {(0, 0, 0, 2)}),
    (2, 0, 1, {(0, 2, 0, 0)}),
    (2, 1, 0, {(0, 0, 2, 0)}),
])
def test_enumerate_tuples_examples(q, l, lp, expected):
    assert set(enumerate_tuples(q, l, lp).tuples) == expected


def _brute(q, l, lp):
    return {
        d for d in product(range(q + 1), repeat=4)
        if d[0] + d[1] == q - 2 * l and d[2] + d[3] == 2 * l
        and d[0] + d[2] == q - 2 * lp and d[1] + d[3] == 2 * lp
    }


@pytest.mark.parametrize("q", range(0, 11))
def test_enumerate_tuples_matches_brute_force(q):
    for l in range(q // 2 + 1):
        for lp in range(q // 2 + 1):
            got = enumerate_tuples(q, l, lp).tuples
            assert len(set(got)) == len(got)
            assert set(got) == _brute(q, l, lp)
            assert len(got) <= min(q - 2 * l, q - 2 * lp) + 1
            if l == lp:
                assert len(got) == min(q - 2 * l, 2 * l) + 1


def test_enumerate_tuples_rejects_bad_indices():
    with pytest.raises(InvalidParameterError):
        enumerate_tuples(2, 2, 0)


def test_mehler_weight_equals_factorial_ratio():
    d = (1, 1, 1, 1)
    ref = math.factorial(2) ** 4 / 1
    assert mehler_weight(4, 1, 1, d) == pytest.approx(ref, rel=1e-13)
    d = (3, 1, 3, 1)  # q = 8, l = 2, l' = 1
    assert d in enumerate_tuples(8, 2, 1).tuples
    ref = 24 * 24 * 720 * 2 / (6 * 1 * 6 * 1)
    assert mehler_weight(8, 2, 1, d) == pytest.approx(ref, rel=1e-13)


def test_chaos_levels_orthogonal_exact():
    x, w = np.polynomial.hermite_e.hermegauss(40)
    w = w / math.sqrt(2 * math.pi)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    F = [f_q(q, X, Y) for q in range(9)]
    gram = np.array([[np.sum(F[i] * F[j] * W) for j in range(9)] for i in range(9)])
    assert np.max(np.abs(gram - np.diag(np.diag(gram)))) <= 1e-14


# total degree <= 8; beyond that the plug-in standard error of these heavy-tailed
# products is biased low and a 3-sigma check is not calibrated
@pytest.mark.parametrize("q,qp", [(0, 2), (0, 4), (2, 4), (2, 6), (0, 8)])
def test_chaos_levels_orthogonal(q, qp):
    rng = np.random.default_rng(100 * q + qp)
    x, y = rng.standard_normal((2, 100_000))
    prod_ = f_q(q, x, y) * f_q(qp, x, y)
    assert abs(prod_.mean()) <= 3 * prod_.std(ddof=1) / math.sqrt(prod_.size)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-4, 4), y=st.floats(-4, 4))
def test_f_q_is_finite_sum(x, y):
    c = coefficients(6)
    ref = sum(c.b[6 - 2 * l] * c.a[2 * l] * hermite(6 - 2 * l, x) * hermite(2 * l, y)
              for l in range(4))
    assert f_q(6, x, y, c) == pytest.approx(ref, rel=1e-12, abs=1e-12)


@pytest.fixture(scope="module")
def spectrum_n100(cheb):
    return chaos_spectrum(cheb, 100, range(2, 9), -0.5, 0.5)


def test_chaos_variances_nonnegative(spectrum_n100):
    assert np.all(spectrum_n100.values >= -1e-9)
    assert np.all(spectrum_n100.errors <= 1e-3)


def test_even_levels_decrease(spectrum_n100):
    even = [v for q, v in zip(spectrum_n100.levels, spectrum_n100.values) if q % 2 == 0]
    for prev, cur in zip(even[1:], even[2:]):
        assert cur <= 1.1 * prev


def test_chaos_variance_single_level_matches_spectrum(cheb, spectrum_n100):
    assert chaos_variance(cheb, 100, 4, -0.5, 0.5) == pytest.approx(
        spectrum_n100.values[2], rel=1e-12)
    assert chaos_variance(cheb, 100, 3, -0.5, 0.5) == 0.0


def _direct_level_variance(basis, n, q, a, b, trials, seed):
    """Sample variance of ``int f_q(X_s, Y_s) v(s) ds`` over ``s in [na, nb]``."""
    x, w = np.polynomial.legendre.leggauss(600)
    x = 0.5 * (b - a) * x + 0.5 * (a + b)
    w = 0.5 * (b - a) * w * n  # ds = n dx
    tab = eval_basis(basis, n, x, 1)
    p, dp = tab[0], tab[1] / n
    K = (p * p).sum(0)
    drift = (p * dp).sum(0) / K
    v = np.sqrt((dp * dp).sum(0) / K - drift**2)
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((trials, n + 1))
    H, dH = xi @ p, xi @ dp
    X = H / np.sqrt(K)
    Y = (dH / np.sqrt(K) - drift * X) / v
    F = f_q(q, X, Y) @ (v * w)
    var = F.var(ddof=1)
    se = np.std((F - F.mean()) ** 2, ddof=1) / math.sqrt(trials)
    return var, se


@pytest.mark.parametrize("q", [2, 3, 4])
def test_level_variance_matches_direct_simulation(cheb, q):
    n, a, b = 50, -0.5, 0.5
    var, se = _direct_level_variance(cheb, n, q, a, b, 10_000, seed=q)
    norm = variance_count(cheb, n, a, b).variance
    computed = chaos_variance(cheb, n, q, a, b, normalization=norm)
    assert abs(var / norm - computed) <= 3 * se / norm + 1e-12


def test_chaos_spectrum_validation(cheb):
    with pytest.raises(InvalidParameterError):
        chaos_spectrum(cheb, 100, [1], -0.5, 0.5)
    with pytest.raises(InvalidParameterError):
        chaos_spectrum(cheb, 201, [2], -0.5, 0.5)
    with pytest.raises(InvalidParameterError):
        chaos_spectrum(cheb, 50, [], -0.5, 0.5)


def test_chaos_accuracy_error_carries_partial(cheb):
    with pytest.raises(AccuracyNotReachedError) as info:
        chaos_spectrum(cheb, 40, [2, 4], -0.5, 0.5, tol=1e-14)
    assert info.value.partial is not None and len(info.value.partial) == 2


def test_contraction_examples():
    c = contraction_bound(100, samples=200_000)
    assert c.closed_form == pytest.approx(8 * math.log(101) ** 3 / 100, rel=1e-14)
    assert c.closed_form == pytest.approx(7.863, abs=1e-3)
    assert contraction_bound(10_000, samples=10_000).closed_form < c.closed_form
    assert c.mc_estimate - 3 * c.mc_std_error <= c.closed_form
    with pytest.raises(InvalidParameterError):
        contraction_bound(5)


def test_contraction_monte_carlo_reproducible():
    a = contraction_bound(50, samples=50_000, seed=3)
    b = contraction_bound(50, samples=50_000, seed=3)
    assert a == b
