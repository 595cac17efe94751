from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.hermite_e import hermegauss, hermeval
from scipy import integrate

from mpga.errors import NumericalError
from mpga.stats import (
    TruncatedSeries,
    cumulants_from_moments,
    gram_charlier_coefficients,
    gram_charlier_is_valid,
    gram_charlier_pdf,
    hermite,
    moments_from_cumulants,
    sample_cumulants,
    sample_cumulants_axis,
    scaled_hermite,
)


def test_hermite_small_orders():
    assert hermite(0, 7.3) == 1.0
    assert hermite(3, 2.0) == pytest.approx(2.0)
    assert hermite(4, 1.5) == pytest.approx(1.5**4 - 6 * 1.5**2 + 3)
    assert hermite(4, 1.5) == pytest.approx(-5.4375)


def test_hermite_matches_numpy_basis():
    x = np.linspace(-3, 3, 13)
    for n in range(8):
        c = np.zeros(n + 1)
        c[n] = 1
        np.testing.assert_allclose(hermite(n, x), hermeval(x, c), rtol=1e-12, atol=1e-12)


def test_hermite_orthogonality():
    # 20-node Gauss-HermiteE quadrature is exact up to degree 39
    x, w = hermegauss(20)
    w = w / np.sqrt(2 * np.pi)
    for n in range(7):
        for m in range(7):
            val = np.sum(w * hermite(n, x) * hermite(m, x))
            expected = float(factorial(n)) if n == m else 0.0
            assert val == pytest.approx(expected, abs=1e-8)


def test_hermite_negative_order():
    with pytest.raises(ValueError):
        hermite(-1, 0.0)


@pytest.mark.parametrize("t", [2.0, 0.5, 1e-3])
@pytest.mark.parametrize("n", range(7))
def test_scaled_hermite_matches_definition(n, t):
    b = 0.7
    assert scaled_hermite(n, t, b) == pytest.approx(t ** (n / 2) * hermite(n, b / np.sqrt(t)),
                                                    rel=1e-10, abs=1e-12)


def test_scaled_hermite_limits():
    # t -> 0 leaves the leading monomial b^n
    assert scaled_hermite(4, 0.0, 1.3) == pytest.approx(1.3**4)
    # negative t is the analytic continuation: t^2 He_4(b/sqrt t) = b^4 - 6 t b^2 + 3 t^2
    assert scaled_hermite(4, -0.5, 1.0) == pytest.approx(1 + 3.0 + 0.75)


def test_moments_known_values():
    np.testing.assert_allclose(moments_from_cumulants([0, 1, 0, 0]), [0, 1, 0, 3])
    np.testing.assert_allclose(moments_from_cumulants([2, 0, 0, 0]), [2, 4, 8, 16])
    # symbolic oracle: mu2 = k2 + k1^2, mu3 = k3 + 3 k2 k1 + k1^3,
    # mu4 = k4 + 4 k3 k1 + 3 k2^2 + 6 k2 k1^2 + k1^4
    k1, k2, k3, k4 = 1.0, 2.0, 3.0, 4.0
    expected = [k1, k2 + k1**2, k3 + 3 * k2 * k1 + k1**3,
                k4 + 4 * k3 * k1 + 3 * k2**2 + 6 * k2 * k1**2 + k1**4]
    np.testing.assert_allclose(moments_from_cumulants([1, 2, 3, 4]), expected)
    np.testing.assert_allclose(expected, [1, 3, 10, 41])


def test_cumulants_known_values():
    np.testing.assert_allclose(cumulants_from_moments([0, 1, 0, 3]), [0, 1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(cumulants_from_moments([0, 1, 0, 1]), [0, 1, 0, -2])


def test_cumulants_negative_variance_raises():
    with pytest.raises(NumericalError):
        cumulants_from_moments([1.0, 0.5, 0, 0])


def test_cumulants_roundoff_variance_is_zero():
    k = cumulants_from_moments([3.0, 9.0 * (1 - 1e-15), 27.0, 81.0])
    assert k[1] == 0.0


def test_roundtrip_random():
    rng = np.random.default_rng(3)
    for _ in range(100):
        k = np.concatenate([rng.normal(size=1), rng.uniform(0.1, 3, size=1), rng.normal(size=4)])
        np.testing.assert_allclose(cumulants_from_moments(moments_from_cumulants(k)), k,
                                   rtol=1e-12, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 5), st.floats(-2, 2), st.floats(-2, 2))
def test_roundtrip_property(k1, k2, k3, k4):
    k = np.array([k1, k2, k3, k4])
    mu = moments_from_cumulants(k)
    assert mu[1] >= mu[0] ** 2
    np.testing.assert_allclose(cumulants_from_moments(mu), k, rtol=1e-9, atol=1e-9)


def test_sample_cumulants_degenerate():
    np.testing.assert_allclose(sample_cumulants([5, 5, 5, 5]), [5, 0, 0, 0])


def test_sample_cumulants_two_point():
    np.testing.assert_allclose(sample_cumulants([-1, 1] * 50), [0, 1, 0, -2], atol=1e-14)


def test_sample_cumulants_normal():
    x = np.random.default_rng(0).standard_normal(10**6)
    k = sample_cumulants(x)
    assert abs(k[2]) < 0.02 and abs(k[3]) < 0.02
    assert k[1] == pytest.approx(1.0, abs=0.01)


def test_sample_cumulants_too_few():
    with pytest.raises(ValueError):
        sample_cumulants([1.0])


def test_sample_cumulants_axis_matches_scalar():
    x = np.random.default_rng(1).exponential(size=(3, 4, 50))
    out = sample_cumulants_axis(x, 5)
    for i in range(3):
        for j in range(4):
            np.testing.assert_allclose(out[i, j], sample_cumulants(x[i, j], 5), rtol=1e-10,
                                       atol=1e-12)


def test_gc_gaussian_value():
    assert gram_charlier_pdf([0, 1, 0, 0], 0.0) == pytest.approx(1 / np.sqrt(2 * np.pi))


def test_gc_pdf_against_direct_formula():
    # skewed case at f = 1: (1 + a3 He3(1)) N(1), a3 = 0.3 / 6
    expected = (1 + 0.05 * (1 - 3)) * np.exp(-0.5) / np.sqrt(2 * np.pi)
    assert gram_charlier_pdf([0, 1, 0.3, 0], 1.0) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(0.217774, abs=1e-6)


@pytest.mark.parametrize("a3,a4", [(0.2, 0.0), (-0.2, 0.2), (0.1, -0.15), (0.0, 0.2)])
def test_gc_normalised(a3, a4):
    k2 = 1.7
    kappa = [0.4, k2, a3 * 6 * k2**1.5, a4 * 24 * k2**2]
    s = np.sqrt(k2)
    val, _ = integrate.quad(lambda f: gram_charlier_pdf(kappa, f), 0.4 - 12 * s, 0.4 + 12 * s,
                            limit=200, epsabs=1e-12)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_gc_coefficients():
    c = gram_charlier_coefficients([0, 4, 8, 32])
    assert c[3] == pytest.approx(8 / (6 * 8))
    assert c[4] == pytest.approx(32 / (24 * 16))


def test_gc_requires_positive_variance():
    with pytest.raises(NumericalError):
        gram_charlier_pdf([0, 0, 0, 0], 0.0)
    with pytest.raises(NumericalError):
        gram_charlier_pdf([0, -1, 0, 0], 0.0)


def test_gc_validity_predicate():
    assert gram_charlier_is_valid([0, 1, 0, 0])
    assert not gram_charlier_is_valid([0, 1, 3.0, 0])
    assert gram_charlier_pdf([0, 1, 3.0, 0], -3.0) < 0


def test_series_exp_of_zero():
    s = TruncatedSeries.constant(0.0, 0.3, 5).exp()
    np.testing.assert_allclose(s.coefficients, [1, 0, 0, 0, 0, 0])


def test_series_derivative_of_square():
    u = TruncatedSeries.variable(0.0, 4)
    assert (u * u).derivative_at_center(2) == pytest.approx(2.0)


def test_series_derivative_beyond_order():
    with pytest.raises(ValueError):
        TruncatedSeries.variable(0.0, 3).derivative_at_center(4)


def test_series_incompatible():
    with pytest.raises(ValueError):
        TruncatedSeries.variable(0.0, 3) + TruncatedSeries.variable(1.0, 3)
    with pytest.raises(ValueError):
        TruncatedSeries.variable(0.0, 3) * TruncatedSeries.variable(0.0, 4)


def test_series_truncation_not_aliased():
    u = TruncatedSeries.variable(0.0, 2)
    np.testing.assert_allclose((u * u * u).coefficients, [0, 0, 0])


def test_series_exp_finite_difference():
    k2, k3, c = 0.8, 0.3, -0.2

    def g(u):
        return np.exp(u * u * k2 + u**3 * k3)

    s = TruncatedSeries.polynomial([0, 0, k2, k3], c, 4).exp()
    h = 1e-3
    fd1 = (g(c + h) - g(c - h)) / (2 * h)
    fd2 = (g(c + h) - 2 * g(c) + g(c - h)) / h**2
    fd3 = (g(c + 2 * h) - 2 * g(c + h) + 2 * g(c - h) - g(c - 2 * h)) / (2 * h**3)
    assert s.derivative_at_center(0) == pytest.approx(g(c), abs=1e-12)
    assert s.derivative_at_center(1) == pytest.approx(fd1, abs=1e-6)
    assert s.derivative_at_center(2) == pytest.approx(fd2, abs=1e-6)
    assert s.derivative_at_center(3) == pytest.approx(fd3, abs=1e-5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4),
       st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_series_exp_homomorphism(a, b):
    sa, sb = TruncatedSeries(0.1, a), TruncatedSeries(0.1, b)
    np.testing.assert_allclose((sa.exp() * sb.exp()).coefficients, (sa + sb).exp().coefficients,
                               rtol=1e-9, atol=1e-9)
