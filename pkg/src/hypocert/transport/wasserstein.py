"""Quadratic Wasserstein distances between equal-size empirical measures.

Distances are induced by a MetricForm: d(x, y)^2 = (x - y)^T Sigma^{-1} (x - y).
Points are whitened once so every solver works with Euclidean costs.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple, Union

import numpy as np
from scipy.linalg import sqrtm
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from ..core.errors import ContractViolationError, TransportConvergenceError
from ..core.operator import MetricForm
from ..dynamics.sde import Ensemble

logger = logging.getLogger(__name__)

Cloud = Union[Ensemble, np.ndarray]

BRUTE_FORCE_LIMIT = 8
MARGINAL_TOL = 1e-6
# relative marginal tolerance of the intermediate eps levels
LEVEL_TOL = 1e-3
EPS_FACTOR = 0.5


@dataclass
class CostMatrix:
    """Squared induced distances between two clouds."""
    entries: np.ndarray
    metric: MetricForm

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass
class SinkhornResult:
    plan: np.ndarray
    cost: float
    marginal_violation: float
    iterations: int
    eps: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cost": self.cost,
            "marginal_violation": self.marginal_violation,
            "iterations": self.iterations,
            "eps": self.eps,
            "plan_entropy": float(-np.sum(self.plan[self.plan > 0] * np.log(self.plan[self.plan > 0]))),
        }


def _points(cloud: Cloud) -> np.ndarray:
    if isinstance(cloud, Ensemble):
        return cloud.particles
    return np.atleast_2d(np.asarray(cloud, dtype=float))


def _pair(X: Cloud, Y: Cloud, S: MetricForm) -> Tuple[np.ndarray, np.ndarray]:
    x, y = _points(X), _points(Y)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ContractViolationError("empirical measures must contain at least one particle")
    if x.shape[0] != y.shape[0]:
        raise ContractViolationError(
            f"unequal particle counts {x.shape[0]} and {y.shape[0]}; resample to a common size"
        )
    if x.shape[1] != S.dim or y.shape[1] != S.dim:
        raise ContractViolationError("particle dimension does not match the metric")
    return x, y


def cost_matrix(X: Cloud, Y: Cloud, S: MetricForm) -> CostMatrix:
    x, y = _pair(X, Y, S)
    entries = cdist(S.whiten(x), S.whiten(y), "sqeuclidean")
    return CostMatrix(np.maximum(entries, 0.0), S)


def optimal_assignment(X: Cloud, Y: Cloud, S: MetricForm) -> Tuple[np.ndarray, float]:
    """Permutation ``perm`` pairing x_i with y_perm[i], and the mean squared cost."""
    C = cost_matrix(X, Y, S).entries
    rows, cols = linear_sum_assignment(C)
    perm = np.empty_like(cols)
    perm[rows] = cols
    return perm, float(C[np.arange(len(perm)), perm].sum() / len(perm))


def w2_exact(X: Cloud, Y: Cloud, S: MetricForm) -> float:
    """W2 by exact linear assignment."""
    _, mean_cost = optimal_assignment(X, Y, S)
    return float(np.sqrt(mean_cost))


def w2_brute_force(X: Cloud, Y: Cloud, S: MetricForm) -> float:
    """W2 by enumerating all permutations; small N only."""
    C = cost_matrix(X, Y, S).entries
    n = C.shape[0]
    if n > BRUTE_FORCE_LIMIT:
        raise ContractViolationError(f"brute force is limited to N <= {BRUTE_FORCE_LIMIT}, got {n}")
    idx = np.arange(n)
    best = min(float(C[idx, np.array(p)].sum()) for p in itertools.permutations(range(n)))
    return float(np.sqrt(best / n))


def _eps_ladder(eps: float, c_max: float, factor: float) -> List[float]:
    """Regularization levels from the largest cost down to ``eps``, shrinking by ``factor``."""
    levels = []
    eps_k = max(eps, c_max)
    while eps_k > eps:
        levels.append(eps_k)
        eps_k = max(eps, factor * eps_k)
    levels.append(eps)
    return levels


def _sinkhorn_level(C: np.ndarray, eps: float, f: np.ndarray, g: np.ndarray, log_w: float,
                    max_iters: int, tol: float, check_every: int
                    ) -> Tuple[np.ndarray, np.ndarray, float, int]:
    violation = np.inf
    it = 0
    while it < max_iters:
        it += 1
        f = eps * (log_w - logsumexp((g[None, :] - C) / eps, axis=1))
        g = eps * (log_w - logsumexp((f[:, None] - C) / eps, axis=0))
        if it % check_every == 0 or it == max_iters:
            # columns are exact after the g update; rows carry the violation
            rows = np.exp(logsumexp((f[:, None] + g[None, :] - C) / eps, axis=1))
            violation = float(np.max(np.abs(rows - np.exp(log_w))))
            if violation <= tol:
                break
    return f, g, violation, it


def sinkhorn_plan(C: np.ndarray, eps: float, max_iters: int = 20_000, tol: float = MARGINAL_TOL,
                  check_every: int = 10, factor: float = EPS_FACTOR) -> SinkhornResult:
    """Log-domain Sinkhorn with uniform marginals and eps-scaling.

    The regularization starts at the largest cost and shrinks by ``factor``
    per level. Every level is iterated until its marginal violation is small
    and its potentials warm-start the next one. ``max_iters`` bounds the
    iterations of each level. Converged when the sup-norm marginal violation
    at ``eps`` drops below ``tol``.
    """
    if eps <= 0:
        raise ContractViolationError(f"regularization must be positive, got {eps}")
    if not 0.0 < factor < 1.0:
        raise ContractViolationError(f"eps-scaling factor must lie in (0, 1), got {factor}")
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    log_w = -np.log(n)
    f = np.zeros(n)
    g = np.zeros(n)

    total = 0
    levels = _eps_ladder(eps, float(C.max()), factor)
    for eps_k in levels:
        level_tol = tol if eps_k == eps else max(tol, LEVEL_TOL / n)
        f, g, violation, it = _sinkhorn_level(C, eps_k, f, g, log_w, max_iters, level_tol,
                                              check_every)
        total += it
        logger.debug(f"sinkhorn eps {eps_k:.3e}: {it} iterations, marginal violation {violation:.3e}")

    plan = np.exp((f[:, None] + g[None, :] - C) / eps)
    violation = float(max(np.max(np.abs(plan.sum(axis=1) - 1.0 / n)),
                          np.max(np.abs(plan.sum(axis=0) - 1.0 / n))))
    if violation > tol:
        raise TransportConvergenceError(
            f"Sinkhorn did not reach marginal tolerance {tol:.1e} in {max_iters} iterations "
            f"at eps {eps:.3e} (violation {violation:.3e})",
            marginal_violation=violation, iterations=total,
        )
    return SinkhornResult(plan=plan, cost=float(np.sum(plan * C)), marginal_violation=violation,
                          iterations=total, eps=float(eps))


def median_cost(X: Cloud, Y: Cloud, S: MetricForm) -> float:
    """Median squared distance between the two clouds; the natural unit for eps."""
    return float(np.median(cost_matrix(X, Y, S).entries))


def w2_entropic(X: Cloud, Y: Cloud, S: MetricForm, eps: float, max_iters: int = 20_000) -> float:
    """Transport cost sqrt(<P_eps, C>) of the entropic plan; decreases to ``w2_exact`` as eps -> 0."""
    C = cost_matrix(X, Y, S).entries
    result = sinkhorn_plan(C, eps, max_iters=max_iters)
    return float(np.sqrt(max(result.cost, 0.0)))


def w2_gaussian(mean1: np.ndarray, cov1: np.ndarray, mean2: np.ndarray, cov2: np.ndarray,
                S: MetricForm) -> float:
    """Bures-Wasserstein distance between two Gaussians in the induced metric."""
    W = S.whitening
    m1, m2 = np.asarray(mean1, float) @ W, np.asarray(mean2, float) @ W
    c1 = W.T @ np.asarray(cov1, float) @ W
    c2 = W.T @ np.asarray(cov2, float) @ W
    root2 = np.real(sqrtm(c2))
    cross = np.real(sqrtm(root2 @ c1 @ root2))
    value = float(np.sum((m1 - m2) ** 2) + np.trace(c1 + c2 - 2.0 * cross))
    return float(np.sqrt(max(value, 0.0)))
