"""Monomial-basis least squares."""

import numpy as np
import pytest

from mpoc import fit_polynomial
from mpoc.errors import TooFewSamples
from mpoc.fitting import design_matrix, monomial_exponents


def test_exponent_ordering_graded_lex():
    assert monomial_exponents(1, 3) == [(0,), (1,), (2,), (3,)]
    assert monomial_exponents(2, 2) == [(0, 0), (0, 1), (1, 0),
                                        (0, 2), (1, 1), (2, 0)]


def test_design_matrix_values():
    A = design_matrix(np.array([[2.0, 3.0]]), monomial_exponents(2, 2))
    np.testing.assert_allclose(A[0], [1.0, 3.0, 2.0, 9.0, 6.0, 4.0])


def test_exact_polynomial_recovered():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(30, 2))
    y = 1.5 - 2.0 * X[:, 0] + 0.5 * X[:, 1] ** 2 + 3.0 * X[:, 0] * X[:, 1]
    fit = fit_polynomial(X, y, 2)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.coefficient(0, 0) == pytest.approx(1.5, abs=1e-10)
    assert fit.coefficient(1, 0) == pytest.approx(-2.0, abs=1e-10)
    assert fit.coefficient(0, 2) == pytest.approx(0.5, abs=1e-10)
    assert fit.coefficient(1, 1) == pytest.approx(3.0, abs=1e-10)
    np.testing.assert_allclose(fit(X), y, atol=1e-10)


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        fit_polynomial(np.zeros((3, 1)), np.zeros(3), 3)


def test_r2_clamped_to_unit_interval():
    X = np.linspace(0, 1, 10)[:, None]
    y = np.sin(40 * X[:, 0])
    fit = fit_polynomial(X, y, 1)
    assert 0.0 <= fit.r2 <= 1.0


def test_domain_is_sample_bounding_box():
    X = np.array([[0.0, -1.0], [2.0, 3.0], [1.0, 1.0]])
    fit = fit_polynomial(X, X[:, 0] + X[:, 1], 1)
    np.testing.assert_allclose(fit.domain, [[0.0, 2.0], [-1.0, 3.0]])
