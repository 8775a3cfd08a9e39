"""Multivariate polynomial least squares on a monomial basis."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from .errors import TooFewSamples


def monomial_exponents(n_vars: int, degree: int):
    """Exponent tuples in graded-lex order: by total degree, then lexicographic."""
    exps = []
    for d in range(degree + 1):
        block = set()
        for combo in combinations_with_replacement(range(n_vars), d):
            e = [0] * n_vars
            for i in combo:
                e[i] += 1
            block.add(tuple(e))
        exps.extend(sorted(block))
    return exps


def design_matrix(X: np.ndarray, exponents) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cols = [np.prod(X ** np.asarray(e, dtype=float), axis=1) for e in exponents]
    return np.column_stack(cols)


@dataclass(frozen=True)
class FittedPolynomial:
    """Least-squares monomial fit with its goodness and fitting domain."""

    vars: int
    degree: int
    coeffs: np.ndarray  # graded-lex order, matching monomial_exponents
    r2: float
    domain: np.ndarray  # (vars, 2) bounding box of the retained samples

    @property
    def exponents(self):
        return monomial_exponents(self.vars, self.degree)

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return design_matrix(X, self.exponents) @ self.coeffs

    def coefficient(self, *exponent) -> float:
        return float(self.coeffs[self.exponents.index(tuple(exponent))])


def fit_polynomial(X: np.ndarray, y: np.ndarray, degree: int) -> FittedPolynomial:
    """Fit y ~ poly(X); R^2 is against the mean-prediction baseline."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n_vars = X.shape[1]
    n_coef = comb(n_vars + degree, degree)
    if y.size < n_coef:
        raise TooFewSamples(f"{y.size} samples for {n_coef} coefficients")
    exps = monomial_exponents(n_vars, degree)
    A = design_matrix(X, exps)
    coeffs, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coeffs
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    domain = np.column_stack([X.min(axis=0), X.max(axis=0)])
    return FittedPolynomial(vars=n_vars, degree=degree, coeffs=coeffs,
                            r2=r2, domain=domain)
