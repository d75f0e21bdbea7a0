"""Exact Gaussian expectations of ridge polynomials, and quadrature oracles.

Used wherever the invariant measure or the transition law is Gaussian, which
is the case for every linear drift with constant diffusion.
"""

import itertools
import logging
from math import comb, factorial
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.linalg import eigh

from ..core.errors import ContractViolationError
from .testfn import RidgePolynomial, RidgeTerm, TestFunction, as_ridge

logger = logging.getLogger(__name__)


def normal_moment(k: int) -> float:
    """E[xi^k] for a standard normal xi: (k-1)!! for even k, 0 for odd k."""
    if k % 2:
        return 0.0
    out = 1.0
    for j in range(k - 1, 0, -2):
        out *= j
    return out


def bivariate_moment(p: int, q: int, mx: float, my: float,
                     cxx: float, cxy: float, cyy: float) -> float:
    """E[X^p Y^q] for (X, Y) jointly normal with the given means and covariances.

    Writes X = mx + a xi1 and Y = my + b xi1 + c xi2 with independent standard
    normals, then expands both powers.
    """
    a = np.sqrt(max(cxx, 0.0))
    if a > 0.0:
        b = cxy / a
        c = np.sqrt(max(cyy - b * b, 0.0))
    else:
        b, c = 0.0, np.sqrt(max(cyy, 0.0))

    total = 0.0
    for i in range(p + 1):
        x_part = comb(p, i) * mx ** (p - i) * a ** i
        if x_part == 0.0:
            continue
        for j in range(q + 1):
            for k in range(q - j + 1):
                l = q - j - k
                m1 = normal_moment(i + k)
                m2 = normal_moment(l)
                if m1 == 0.0 or m2 == 0.0:
                    continue
                coef = factorial(q) / (factorial(j) * factorial(k) * factorial(l))
                total += x_part * coef * my ** j * b ** k * c ** l * m1 * m2
    return float(total)


def _check_gaussian(mean: np.ndarray, cov: np.ndarray, dim: int) -> None:
    if mean.shape != (dim,) or cov.shape != (dim, dim):
        raise ContractViolationError(
            f"Gaussian parameters have shapes {mean.shape}, {cov.shape}; expected dimension {dim}"
        )


def _term_stats(t: RidgeTerm, mean: np.ndarray) -> float:
    return float(np.dot(t.direction, mean) + t.offset)


def expectation(f: TestFunction, mean: np.ndarray, cov: np.ndarray) -> float:
    """E[f(Z)] for Z ~ N(mean, cov) and polynomial f."""
    ridge = as_ridge(f)
    mean, cov = np.asarray(mean, float), np.asarray(cov, float)
    _check_gaussian(mean, cov, ridge.arity)
    total = ridge.constant
    for t in ridge.terms:
        w = np.asarray(t.direction)
        total += t.coef * bivariate_moment(t.power, 0, _term_stats(t, mean), 0.0,
                                           float(w @ cov @ w), 0.0, 0.0)
    return float(total)


def second_moment(f: TestFunction, mean: np.ndarray, cov: np.ndarray) -> float:
    """E[f(Z)^2] for Z ~ N(mean, cov) and polynomial f."""
    ridge = as_ridge(f)
    mean, cov = np.asarray(mean, float), np.asarray(cov, float)
    _check_gaussian(mean, cov, ridge.arity)
    c0 = ridge.constant
    total = c0 * c0
    for t in ridge.terms:
        w = np.asarray(t.direction)
        total += 2.0 * c0 * t.coef * bivariate_moment(
            t.power, 0, _term_stats(t, mean), 0.0, float(w @ cov @ w), 0.0, 0.0)
    for t1, t2 in itertools.product(ridge.terms, repeat=2):
        w1, w2 = np.asarray(t1.direction), np.asarray(t2.direction)
        total += t1.coef * t2.coef * bivariate_moment(
            t1.power, t2.power, _term_stats(t1, mean), _term_stats(t2, mean),
            float(w1 @ cov @ w1), float(w1 @ cov @ w2), float(w2 @ cov @ w2))
    return float(total)


def variance(f: TestFunction, mean: np.ndarray, cov: np.ndarray) -> float:
    m = expectation(f, mean, cov)
    return max(second_moment(f, mean, cov) - m * m, 0.0)


def t_expectation(f: TestFunction, sigma: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """E[grad f(Z)^T Sigma grad f(Z)] for Z ~ N(mean, cov) and polynomial f."""
    ridge = as_ridge(f)
    sigma = np.asarray(sigma, float)
    mean, cov = np.asarray(mean, float), np.asarray(cov, float)
    _check_gaussian(mean, cov, ridge.arity)
    total = 0.0
    for t1, t2 in itertools.product(ridge.terms, repeat=2):
        w1, w2 = np.asarray(t1.direction), np.asarray(t2.direction)
        weight = t1.coef * t2.coef * t1.power * t2.power * float(w1 @ sigma @ w2)
        if weight == 0.0:
            continue
        total += weight * bivariate_moment(
            t1.power - 1, t2.power - 1, _term_stats(t1, mean), _term_stats(t2, mean),
            float(w1 @ cov @ w1), float(w1 @ cov @ w2), float(w2 @ cov @ w2))
    return float(total)


def centered(f: TestFunction, mean: np.ndarray, cov: np.ndarray) -> RidgePolynomial:
    """Shift f by a constant so that its Gaussian mean vanishes."""
    ridge = as_ridge(f)
    return ridge.shifted(-expectation(ridge, mean, cov))


def propagate_ridge(f: TestFunction, flow: np.ndarray, cov_t: np.ndarray) -> RidgePolynomial:
    """Exact ``P_t f`` for a linear diffusion.

    With Z_t = flow @ z + eta and eta ~ N(0, cov_t), each term
    (w.Z_t + s)^p becomes sum over even j of C(p, j) E[eta_w^j] (w'.z + s)^(p-j)
    where w' = flow^T w and eta_w has variance w^T cov_t w.
    """
    ridge = as_ridge(f)
    flow = np.asarray(flow, float)
    cov_t = np.asarray(cov_t, float)
    terms = []
    constant = ridge.constant
    for t in ridge.terms:
        w = np.asarray(t.direction)
        w_new = tuple(flow.T @ w)
        var = float(w @ cov_t @ w)
        for j in range(0, t.power + 1, 2):
            weight = t.coef * comb(t.power, j) * normal_moment(j) * var ** (j // 2)
            if weight == 0.0:
                continue
            if t.power == j:
                constant += weight
            else:
                terms.append(RidgeTerm(weight, w_new, t.offset, t.power - j))
    return RidgePolynomial(ridge.arity, terms, constant, ridge.family_tag)


def gaussian_poincare_constant(cov: np.ndarray, sigma: np.ndarray) -> float:
    """Smallest C with Var(f) <= C * E[grad f^T Sigma grad f] under N(m, cov).

    The Gaussian Poincare inequality Var(f) <= E[grad f^T cov grad f] is sharp on
    linear functions, so C is the largest generalized eigenvalue of (cov, Sigma).
    """
    return float(eigh(np.asarray(cov, float), np.asarray(sigma, float), eigvals_only=True).max())


def default_quadrature_order(dim: int) -> int:
    if dim <= 2:
        return 20
    if dim <= 4:
        return 10
    return 6


def gauss_hermite_expectation(func: Callable[[np.ndarray], np.ndarray], mean: np.ndarray,
                              cov: np.ndarray, order: Optional[int] = None) -> float:
    """Tensor-product Gauss-Hermite estimate of E[func(Z)], Z ~ N(mean, cov).

    ``func`` is evaluated once on a batch of nodes of shape ``(M, d)``. Exact for
    polynomials of degree below ``2 * order`` in every coordinate.
    """
    mean = np.asarray(mean, float)
    cov = np.asarray(cov, float)
    dim = mean.size
    order = default_quadrature_order(dim) if order is None else order
    nodes, weights = hermegauss(order)
    weights = weights / np.sqrt(2.0 * np.pi)

    lam, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    root = vecs * np.sqrt(np.clip(lam, 0.0, None))

    grid = np.array(list(itertools.product(nodes, repeat=dim)))
    w = np.prod(np.array(list(itertools.product(weights, repeat=dim))), axis=1)
    points = mean + grid @ root.T
    logger.debug(f"Gauss-Hermite quadrature with {len(w)} nodes in dimension {dim}")
    return float(np.dot(w, func(points)))
