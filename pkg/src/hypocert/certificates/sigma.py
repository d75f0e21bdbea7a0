"""Search for a constant metric Sigma with -sym(J_k Sigma) >= a I on Jacobian samples.

The pairing follows the resolved convention of ``t2_lower_matrix``: the
lower-bound matrix of T2 at a sample is B_k = -(J_k Sigma + Sigma J_k^T) / 2.
Maximizes a by bisection; feasibility at fixed a minimizes
phi(Sigma) = max_k lambda_max(sym(J_k Sigma)) + a over trace-normalized Sigma with
Polyak subgradient steps. Every returned certificate is re-verified by direct
eigenvalue computation.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from ..core.errors import ContractViolationError
from ..core.operator import MetricForm, gamma_bound, t2_rate

logger = logging.getLogger(__name__)


@dataclass
class SigmaSearchOptions:
    """Options for ``find_sigma``."""
    max_iters: int = 500
    tol: float = 1e-6
    eps_floor: float = 1e-6
    trace_target: Optional[float] = None  # defaults to n
    max_bisection_steps: int = 60


@dataclass
class SigmaCertificate:
    """Verified Sigma with -sym(J_k Sigma) >= rate_a I on every sample."""
    sigma: np.ndarray
    rate_a: float
    residuals: np.ndarray
    normalization: float
    iterations: int = 0
    provenance: Dict[str, Any] = field(default_factory=dict)

    feasible = True

    def metric(self) -> MetricForm:
        return MetricForm(self.sigma)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.sigma.tolist(),
            "rate_a": self.rate_a,
            "residuals": self.residuals.tolist(),
            "normalization": self.normalization,
            "iterations": self.iterations,
            "provenance": self.provenance,
        }


@dataclass
class InfeasibilityReport:
    """No Sigma with positive rate was found."""
    best_phi: float
    best_sigma: np.ndarray
    rate_tried: float
    iterations: int
    message: str

    feasible = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "feasible": False,
            "best_phi": self.best_phi,
            "best_sigma": self.best_sigma.tolist(),
            "rate_tried": self.rate_tried,
            "iterations": self.iterations,
            "message": self.message,
        }


@dataclass
class ResidualReport:
    residuals: np.ndarray
    min_residual: float
    passed: bool
    tolerance: float = 1e-8


def _stack(jacobians: Sequence[np.ndarray]) -> np.ndarray:
    if len(jacobians) == 0:
        raise ContractViolationError("at least one Jacobian sample is required")
    stack = np.array([np.asarray(J, dtype=float) for J in jacobians])
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ContractViolationError(f"Jacobian samples must be square matrices, got shape {stack.shape[1:]}")
    return stack


def _sym(stack: np.ndarray) -> np.ndarray:
    return 0.5 * (stack + np.swapaxes(stack, -1, -2))


def sigma_rates(sigma: np.ndarray, jacobians: Sequence[np.ndarray]) -> np.ndarray:
    """Per-sample smallest eigenvalue of -sym(J_k Sigma)."""
    stack = _stack(jacobians)
    return np.linalg.eigvalsh(-_sym(stack @ sigma)).min(axis=-1)


def verify_certificate(cert: SigmaCertificate, jacobians: Sequence[np.ndarray],
                       tolerance: float = 1e-8) -> ResidualReport:
    """Recompute residuals lambda_min(-sym(J_k Sigma)) - a by direct eigensolve."""
    stack = _stack(jacobians)
    if stack.shape[1] != cert.sigma.shape[0]:
        raise ContractViolationError("certificate and Jacobian dimensions differ")
    residuals = sigma_rates(cert.sigma, stack) - cert.rate_a
    min_res = float(residuals.min())
    return ResidualReport(residuals=residuals, min_residual=min_res,
                          passed=min_res >= -tolerance, tolerance=tolerance)


class _Projector:
    """Projection onto {Sigma symmetric, Sigma >= floor I, tr Sigma = target}."""

    def __init__(self, n: int, target: float, eps_floor: float):
        self.n = n
        self.target = target
        self.floor = eps_floor * target / n

    def __call__(self, sigma: np.ndarray) -> np.ndarray:
        lam, vecs = np.linalg.eigh(0.5 * (sigma + sigma.T))
        # shift into the trace plane, then clip at the floor, then rescale
        lam = lam + (self.target - lam.sum()) / self.n
        lam = np.maximum(lam, self.floor)
        lam *= self.target / lam.sum()
        out = (vecs * lam) @ vecs.T
        return 0.5 * (out + out.T)


def _phi(stack: np.ndarray, sigma: np.ndarray, a: float) -> Tuple[float, int, np.ndarray]:
    vals, vecs = np.linalg.eigh(_sym(stack @ sigma))
    top = vals[:, -1]
    k = int(np.argmax(top))
    return float(top[k] + a), k, vecs[k][:, -1]


def _minimize_phi(stack: np.ndarray, start: np.ndarray, a: float, project: _Projector,
                  opts: SigmaSearchOptions) -> Tuple[np.ndarray, float, int]:
    """Polyak subgradient descent on phi until phi < 0 or max_iters is reached."""
    sigma = start.copy()
    best_sigma, best_phi = sigma, np.inf
    target_phi = -0.5 * opts.tol
    n = sigma.shape[0]
    it = 0
    for it in range(1, opts.max_iters + 1):
        phi, k, u = _phi(stack, sigma, a)
        if phi < best_phi:
            best_sigma, best_phi = sigma, phi
        if phi < 0.0:
            break
        outer = np.outer(u, u)
        G = 0.5 * (stack[k].T @ outer + outer @ stack[k])
        G -= np.trace(G) / n * np.eye(n)
        gnorm2 = float(np.sum(G * G))
        if gnorm2 == 0.0:
            break
        sigma = project(sigma - (phi - target_phi) / gnorm2 * G)
    return best_sigma, best_phi, it


def _warm_start(stack: np.ndarray, project: _Projector) -> np.ndarray:
    """Solve J_bar Sigma + Sigma J_bar^T = -2 I for the averaged Jacobian."""
    n = stack.shape[1]
    J_bar = stack.mean(axis=0)
    try:
        sigma0 = solve_continuous_lyapunov(J_bar, -2.0 * np.eye(n))
        sigma0 = 0.5 * (sigma0 + sigma0.T)
        if np.all(np.isfinite(sigma0)) and np.linalg.eigvalsh(sigma0).min() > 0:
            return project(sigma0)
        logger.debug("Lyapunov warm start is not positive definite; using identity")
    except (np.linalg.LinAlgError, ValueError) as exc:
        logger.debug(f"Lyapunov warm start failed: {exc}")
    return project(np.eye(n))


def find_sigma(jacobians: Sequence[np.ndarray], opts: Optional[SigmaSearchOptions] = None
               ) -> Union[SigmaCertificate, InfeasibilityReport]:
    """Maximize a such that -sym(J_k Sigma) >= a I on all samples, tr Sigma normalized.

    The search always runs at trace n. A different ``trace_target`` t rescales
    the result by t / n, so Sigma and the rate scale together exactly.
    """
    opts = opts or SigmaSearchOptions()
    stack = _stack(jacobians)
    n = stack.shape[1]
    target = float(opts.trace_target) if opts.trace_target is not None else float(n)
    if target <= 0:
        raise ContractViolationError(f"trace target must be positive, got {target}")
    scale = target / n
    project = _Projector(n, float(n), opts.eps_floor)

    best = _warm_start(stack, project)
    a_best = float(sigma_rates(best, stack).min())
    lo = max(a_best, 0.0)
    hi = max(n * float(np.linalg.norm(stack, ord=2, axis=(1, 2)).min()), lo)
    total_iters = 0
    phi_at_lo = np.inf
    steps = 0
    logger.debug(f"Sigma search: n={n}, samples={len(stack)}, warm start rate {a_best:.6g}, bracket [{lo:.6g}, {hi:.6g}]")

    while hi - lo > opts.tol and steps < opts.max_bisection_steps:
        steps += 1
        mid = 0.5 * (lo + hi)
        sigma, phi, iters = _minimize_phi(stack, best, mid, project, opts)
        total_iters += iters
        rate = float(sigma_rates(sigma, stack).min())
        if phi < 0.0 and rate > a_best:
            best, a_best = sigma, rate
            lo = max(mid, rate)
        else:
            hi = mid
            if mid <= opts.tol:
                phi_at_lo = min(phi_at_lo, phi)
        logger.debug(f"bisection step {steps}: a={mid:.6g} phi={phi:.3e} bracket [{lo:.6g}, {hi:.6g}]")

    if a_best <= 0.0:
        if not np.isfinite(phi_at_lo):
            phi_at_lo = _phi(stack, best, 0.0)[0]
        message = (
            "no Sigma found with -sym(J_k Sigma) positive definite on all samples; "
            "some convex combination of the symmetric parts may be indefinite"
        )
        logger.warning(f"Sigma search infeasible: best phi {phi_at_lo:.3e}")
        return InfeasibilityReport(best_phi=float(phi_at_lo), best_sigma=scale * best,
                                   rate_tried=scale * float(hi), iterations=total_iters,
                                   message=message)

    residuals = scale * (sigma_rates(best, stack) - a_best)
    best, a_best = scale * best, scale * a_best
    cert = SigmaCertificate(
        sigma=best,
        rate_a=a_best,
        residuals=residuals,
        normalization=float(np.trace(best)),
        iterations=total_iters,
        provenance={
            "samples": int(len(stack)),
            "bisection_steps": steps,
            "bracket": [scale * lo, scale * hi],
            "options": {"max_iters": opts.max_iters, "tol": opts.tol,
                        "eps_floor": opts.eps_floor, "trace_target": target},
            "note": "sampled Jacobians, not a global certificate",
        },
    )
    report = verify_certificate(cert, stack)
    if not report.passed:
        raise ContractViolationError(
            f"certificate failed a posteriori verification (min residual {report.min_residual:.3e})"
        )
    logger.info(f"Sigma certificate found: rate a={a_best:.6g} after {total_iters} subgradient steps")
    return cert


def certificate_rate(cert: SigmaCertificate, jacobians: Optional[Sequence[np.ndarray]] = None) -> float:
    """Rate rho of T2 >= rho T for T built on ``cert.sigma``.

    With samples, the sharp value min_k t2_rate(J_k, Sigma); otherwise the
    bound a / lambda_max(Sigma).
    """
    metric = cert.metric()
    if jacobians is None:
        return float(cert.rate_a / metric.eigenvalues.max())
    return float(min(t2_rate(J, metric) for J in _stack(jacobians)))


def poincare_constant(cert: SigmaCertificate, diffusion: np.ndarray,
                      jacobians: Optional[Sequence[np.ndarray]] = None) -> float:
    """Constant C3 with Var(f) <= C3 * E|grad f|^2 implied by the certificate.

    Var(f) <= (a_gamma / rho) E[T(f)] and T(f) <= lambda_max(Sigma) |grad f|^2.
    """
    metric = cert.metric()
    rho = certificate_rate(cert, jacobians)
    if rho <= 0.0:
        return float("inf")
    return float(gamma_bound(diffusion, metric) * metric.eigenvalues.max() / rho)


def sample_jacobians(jacobian, points: np.ndarray) -> List[np.ndarray]:
    """Evaluate a Jacobian field on a list of points."""
    return [np.asarray(jacobian(p), dtype=float) for p in np.atleast_2d(points)]
