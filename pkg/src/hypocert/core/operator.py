"""Pointwise calculus of L, Gamma, T and T2 for constant-diffusion operators.

Conventions: ``drift_jacobian(x)[k, i] = d b_k / d x_i``. With constant diffusion
A and constant metric Sigma, the iterated form reduces to

    T2(f) = tr(A H Sigma H) - grad f^T Sigma J^T grad f,

so ``T2(f) >= grad f^T B grad f`` with ``B = -(J Sigma + Sigma J^T) / 2``, with
equality for linear f.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import minimize

from ..functions.testfn import TestFunction, fd_step
from .errors import ContractViolationError, UnsupportedFunctionError

logger = logging.getLogger(__name__)

Field = Callable[[np.ndarray], np.ndarray]


def _symmetric(matrix: np.ndarray, what: str, tol: float = 1e-12) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ContractViolationError(f"{what} must be a square matrix, got shape {matrix.shape}")
    scale = max(1.0, float(np.max(np.abs(matrix))))
    if np.max(np.abs(matrix - matrix.T)) > tol * scale:
        raise ContractViolationError(f"{what} is not symmetric")
    return 0.5 * (matrix + matrix.T)


@dataclass
class DiffusionOperator:
    """L = sum a_ij d_i d_j + sum b_i d_i with constant diffusion a_ij.

    ``drift`` accepts points of shape ``(..., dim)``; ``drift_jacobian`` takes a
    single point. ``linear_matrix`` is set when the drift is ``z -> J z``.
    """
    dim: int
    diffusion: np.ndarray
    drift: Field
    drift_jacobian: Field
    name: str = "operator"
    linear_matrix: Optional[np.ndarray] = None
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ContractViolationError("operator dimension must be positive")
        self.diffusion = _symmetric(self.diffusion, "diffusion")
        if self.diffusion.shape != (self.dim, self.dim):
            raise ContractViolationError(
                f"diffusion has shape {self.diffusion.shape}, expected ({self.dim}, {self.dim})"
            )
        if np.linalg.eigvalsh(self.diffusion).min() < -1e-12:
            raise ContractViolationError("diffusion must be positive semidefinite")

    @classmethod
    def linear(cls, J: np.ndarray, diffusion: np.ndarray, name: str = "linear") -> "DiffusionOperator":
        """Operator with drift ``b(z) = J z``."""
        J = np.array(J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ContractViolationError("drift matrix must be square")

        def drift(z: np.ndarray) -> np.ndarray:
            # elementwise einsum keeps each row independent of the batch size
            return np.einsum("ij,...j->...i", J, z, optimize=False)

        def jacobian(z: np.ndarray) -> np.ndarray:
            return J.copy()

        return cls(J.shape[0], np.asarray(diffusion, float), drift, jacobian, name=name,
                   linear_matrix=J)

    @property
    def is_linear(self) -> bool:
        return self.linear_matrix is not None

    def jacobian_error(self, x: np.ndarray, h: Optional[float] = None) -> float:
        """Max deviation of ``drift_jacobian(x)`` from central differences of ``drift``."""
        x = np.asarray(x, dtype=float)
        h = fd_step(x) if h is None else h
        eye = np.eye(self.dim)
        fd = (self.drift(x + h * eye) - self.drift(x - h * eye)) / (2 * h)
        return float(np.max(np.abs(fd.T - self.drift_jacobian(x))))


class MetricForm:
    """Constant positive-definite Sigma defining T(f) = grad f^T Sigma grad f."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = _symmetric(matrix, "metric")
        eigvals = np.linalg.eigvalsh(self.matrix)
        if eigvals.min() <= 0.0:
            raise ContractViolationError(
                f"metric must be positive definite, smallest eigenvalue {eigvals.min():.3e}"
            )
        self.inverse = np.linalg.inv(self.matrix)
        if np.max(np.abs(self.matrix @ self.inverse - np.eye(self.dim))) > 1e-10:
            raise ContractViolationError("metric is too ill-conditioned to invert accurately")
        self.eigenvalues = eigvals
        self.cond = float(eigvals.max() / eigvals.min())
        # W W^T = Sigma^{-1}; whitening for the induced distance
        self.whitening = np.linalg.cholesky(self.inverse)

    @classmethod
    def identity(cls, dim: int) -> "MetricForm":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def whiten(self, points: np.ndarray) -> np.ndarray:
        """Map points so that Euclidean distances equal induced distances."""
        return np.asarray(points, float) @ self.whitening

    def to_dict(self) -> Dict[str, Any]:
        return {"matrix": self.matrix.tolist(), "cond": self.cond}

    def __repr__(self) -> str:
        return f"MetricForm(dim={self.dim}, cond={self.cond:.4g})"


@dataclass
class LowerBoundMatrix:
    """Symmetric B with T2(f) >= grad f^T B grad f."""
    matrix: np.ndarray

    def quadratic(self, g: np.ndarray) -> float:
        g = np.asarray(g, float)
        return float(g @ self.matrix @ g)


def _check_dims(dim: int, *others: int) -> None:
    for other in others:
        if other != dim:
            raise ContractViolationError(f"dimension mismatch: {dim} vs {other}")


def apply_operator(op: DiffusionOperator, f: TestFunction, x: np.ndarray) -> float:
    """Lf(x) = tr(A hess f(x)) + b(x) . grad f(x)."""
    _check_dims(op.dim, f.arity, np.shape(x)[-1])
    x = np.asarray(x, dtype=float)
    return float(np.sum(op.diffusion * f.hess(x)) + op.drift(x) @ f.grad(x))


def carre_du_champ(op: DiffusionOperator, f: TestFunction, x: np.ndarray) -> float:
    """Gamma(f)(x) = grad f^T A grad f (constant diffusion)."""
    _check_dims(op.dim, f.arity, np.shape(x)[-1])
    g = f.grad(np.asarray(x, dtype=float))
    return float(g @ op.diffusion @ g)


def t_form(S: MetricForm, f: TestFunction, g: TestFunction, x: np.ndarray) -> float:
    """T(f, g)(x) = grad f^T Sigma grad g."""
    _check_dims(S.dim, f.arity, g.arity, np.shape(x)[-1])
    x = np.asarray(x, dtype=float)
    return float(f.grad(x) @ S.matrix @ g.grad(x))


def _iterated_form(op: DiffusionOperator, sigma: np.ndarray, f: TestFunction, x: np.ndarray) -> float:
    """1/2 (L T(f) - 2 T(f, Lf)) assembled from its defining pieces."""
    try:
        third = f.third(x)
    except NotImplementedError as exc:
        raise UnsupportedFunctionError(f"{type(f).__name__} lacks third derivatives") from exc
    A = op.diffusion
    grad, hess = f.grad(x), f.hess(x)
    b = op.drift(x)
    J = op.drift_jacobian(x)
    sg = sigma @ grad

    # Hessian and gradient of T(f) = grad^T Sigma grad
    hess_t = 2.0 * (np.einsum("ijk,k->ij", third, sg) + hess @ sigma @ hess)
    grad_t = 2.0 * hess @ sg
    l_t = float(np.sum(A * hess_t) + b @ grad_t)

    # gradient of Lf
    grad_lf = np.einsum("ij,ijl->l", A, third) + J.T @ grad + hess @ b
    t_cross = float(sg @ grad_lf)
    return 0.5 * l_t - t_cross


def t2_form(op: DiffusionOperator, S: MetricForm, f: TestFunction, x: np.ndarray) -> float:
    """T2(f)(x) = 1/2 (L T(f) - 2 T(f, Lf))(x) from analytic derivatives."""
    _check_dims(op.dim, S.dim, f.arity, np.shape(x)[-1])
    return _iterated_form(op, S.matrix, f, np.asarray(x, dtype=float))


def gamma2_form(op: DiffusionOperator, f: TestFunction, x: np.ndarray) -> float:
    """Classical Gamma_2(f)(x) = 1/2 (L Gamma(f) - 2 Gamma(f, Lf))(x)."""
    _check_dims(op.dim, f.arity, np.shape(x)[-1])
    return _iterated_form(op, op.diffusion, f, np.asarray(x, dtype=float))


def t2_closed_form(op: DiffusionOperator, S: MetricForm, f: TestFunction, x: np.ndarray) -> float:
    """tr(A H Sigma H) - grad^T Sigma J^T grad, the reduced form of T2."""
    _check_dims(op.dim, S.dim, f.arity, np.shape(x)[-1])
    x = np.asarray(x, dtype=float)
    grad, hess = f.grad(x), f.hess(x)
    J = op.drift_jacobian(x)
    return float(np.trace(op.diffusion @ hess @ S.matrix @ hess) - grad @ S.matrix @ J.T @ grad)


def t2_finite_difference(op: DiffusionOperator, S: MetricForm, f: TestFunction, x: np.ndarray,
                         h: Optional[float] = None) -> float:
    """Nested finite-difference oracle for T2.

    Applies a central-difference L to the pointwise values of T(f) and takes a
    central-difference gradient of the pointwise values of Lf. Only first and
    second derivatives of f enter.
    """
    x = np.asarray(x, dtype=float)
    _check_dims(op.dim, S.dim, f.arity, x.shape[-1])
    h = fd_step(x) if h is None else h
    d = op.dim
    eye = np.eye(d)

    def t_val(z: np.ndarray) -> np.ndarray:
        g = f.grad(z)
        return np.einsum("...i,ij,...j->...", g, S.matrix, g)

    def lf_val(z: np.ndarray) -> np.ndarray:
        return (np.einsum("ij,...ij->...", op.diffusion, f.hess(z))
                + np.einsum("...i,...i->...", op.drift(z), f.grad(z)))

    t0 = float(t_val(x))
    t_plus, t_minus = t_val(x + h * eye), t_val(x - h * eye)
    hess_t = np.empty((d, d))
    for i in range(d):
        hess_t[i, i] = (t_plus[i] - 2.0 * t0 + t_minus[i]) / h ** 2
        for j in range(i + 1, d):
            ei, ej = h * eye[i], h * eye[j]
            corners = t_val(np.stack([x + ei + ej, x + ei - ej, x - ei + ej, x - ei - ej]))
            hess_t[i, j] = hess_t[j, i] = (corners[0] - corners[1] - corners[2] + corners[3]) / (4 * h * h)
    grad_t = (t_plus - t_minus) / (2 * h)
    l_t = float(np.sum(op.diffusion * hess_t) + op.drift(x) @ grad_t)

    grad_lf = (lf_val(x + h * eye) - lf_val(x - h * eye)) / (2 * h)
    t_cross = float(f.grad(x) @ S.matrix @ grad_lf)
    return 0.5 * l_t - t_cross


def t2_lower_matrix(J: np.ndarray, S: MetricForm) -> LowerBoundMatrix:
    """B = -(J Sigma + Sigma J^T) / 2 so that T2(f) >= grad f^T B grad f."""
    J = np.asarray(J, dtype=float)
    _check_dims(S.dim, *J.shape)
    js = J @ S.matrix
    return LowerBoundMatrix(-0.5 * (js + js.T))


def t2_rate(J: np.ndarray, S: MetricForm) -> float:
    """Largest rho with B >= rho Sigma: the smallest generalized eigenvalue of (B, Sigma).

    Negative values mean growth: T2 >= -K T holds with K = -rate.
    """
    B = t2_lower_matrix(J, S).matrix
    return float(eigh(B, S.matrix, eigvals_only=True).min())


def gamma_bound(A: np.ndarray, S: MetricForm) -> float:
    """Smallest a with Gamma <= a T: the largest generalized eigenvalue of (A, Sigma)."""
    A = _symmetric(A, "diffusion")
    _check_dims(S.dim, A.shape[0])
    return float(eigh(A, S.matrix, eigvals_only=True).max())


def bakry_emery_rate(op: DiffusionOperator, x: np.ndarray) -> float:
    """Curvature rate of Gamma_2 >= rho Gamma for elliptic operators at x."""
    if np.linalg.eigvalsh(op.diffusion).min() <= 1e-12:
        raise ContractViolationError(
            f"{op.name}: diffusion is degenerate, Gamma_2 >= rho Gamma has no finite rate"
        )
    return t2_rate(op.drift_jacobian(np.asarray(x, dtype=float)), MetricForm(op.diffusion))


def induced_distance(S: MetricForm, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """sqrt((x - y)^T Sigma^{-1} (x - y)), broadcasting over leading axes."""
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    _check_dims(S.dim, diff.shape[-1])
    out = np.sqrt(np.einsum("...i,ij,...j->...", diff, S.inverse, diff))
    return float(out) if out.ndim == 0 else out


def dual_distance(S: MetricForm, x: np.ndarray, y: np.ndarray) -> float:
    """sup of u.(x - y) over u^T Sigma u <= 1, solved numerically.

    Linear test functions attain the supremum in the definition of the
    induced distance, so this is an independent check of ``induced_distance``.
    """
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if not np.any(diff):
        return 0.0
    u0 = diff / np.sqrt(diff @ S.matrix @ diff)
    scale = float(np.linalg.norm(diff))
    result = minimize(
        lambda u: -(u @ diff) / scale,
        u0,
        jac=lambda u: -diff / scale,
        constraints=[{
            "type": "ineq",
            "fun": lambda u: 1.0 - u @ S.matrix @ u,
            "jac": lambda u: -2.0 * S.matrix @ u,
        }],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    if not result.success:
        logger.warning(f"dual distance optimisation stopped early: {result.message}")
    return float(result.x @ diff)
