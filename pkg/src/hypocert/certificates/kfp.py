"""Closed-form certificates for the kinetic Fokker-Planck operator.

Given Hessian bounds m <= hess V <= M, solve for the twist (a, b) with
a + b - 2a^2 = (m + M)/2 and b - a = sqrt(mM), build the metric
S = [[1, a], [a, b]] (x) I_n and its contraction rate.

Orientation: ``S`` certifies the generator Delta_v - v.grad_v + grad V.grad_v - v.grad_x.
``build_operator`` follows the SDE dx = v dt, dv = -v dt - grad V dt + sqrt(2) dB, which is
the same process under v -> -v; ``KfpParams.sde_metric()`` is the matching metric.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import eigh

from ..core.errors import ContractViolationError, InfeasibleCertificateError
from ..core.operator import DiffusionOperator, MetricForm

logger = logging.getLogger(__name__)

KFP_CONDITION = "sqrt(M) - sqrt(m) <= 1"


@dataclass
class PotentialSpec:
    """Confining potential V on R^n with Hessian bounds (m, M).

    ``v_grad`` and ``v_value`` accept batches of shape ``(..., n)``; ``v_hess``
    takes a single point. ``quadratic_hessian`` is set when V = x^T W x / 2.
    """
    n: int
    v_value: Callable[[np.ndarray], np.ndarray]
    v_grad: Callable[[np.ndarray], np.ndarray]
    v_hess: Callable[[np.ndarray], np.ndarray]
    hessian_bounds: Tuple[float, float]
    name: str = "potential"
    quadratic_hessian: Optional[np.ndarray] = None
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        m, M = self.hessian_bounds
        if not 0 < m <= M:
            raise ContractViolationError(f"Hessian bounds must satisfy 0 < m <= M, got ({m}, {M})")

    @property
    def is_quadratic(self) -> bool:
        return self.quadratic_hessian is not None

    def bound_violation(self, points: np.ndarray) -> float:
        """Largest distance of a sampled Hessian eigenvalue outside [m, M]."""
        m, M = self.hessian_bounds
        worst = 0.0
        for x in np.atleast_2d(points):
            eig = np.linalg.eigvalsh(self.v_hess(x))
            worst = max(worst, m - eig.min(), eig.max() - M)
        return float(worst)


def quadratic_potential(omega: float = 1.0, n: int = 1) -> PotentialSpec:
    """V(x) = omega^2 |x|^2 / 2."""
    w2 = float(omega) ** 2
    W = w2 * np.eye(n)
    return PotentialSpec(
        n=n,
        v_value=lambda x: 0.5 * w2 * np.sum(np.asarray(x) ** 2, axis=-1),
        v_grad=lambda x: w2 * np.asarray(x, dtype=float),
        v_hess=lambda x: W.copy(),
        hessian_bounds=(w2, w2),
        name=f"quadratic(omega={omega:g})",
        quadratic_hessian=W,
        parameters={"kind": "kfp_quadratic", "omega": float(omega), "n": n},
    )


def cosine_perturbed_potential(omega: float = 1.0, epsilon: float = 0.1, n: int = 1) -> PotentialSpec:
    """V(x) = omega^2 |x|^2 / 2 + epsilon sum_i cos(x_i).

    Hessian eigenvalues omega^2 - epsilon cos(x_i) lie in [omega^2 - |eps|, omega^2 + |eps|].
    """
    w2 = float(omega) ** 2
    eps = float(epsilon)
    if abs(eps) >= w2:
        raise ContractViolationError("perturbation amplitude must be smaller than omega^2")
    return PotentialSpec(
        n=n,
        v_value=lambda x: np.sum(0.5 * w2 * np.asarray(x) ** 2 + eps * np.cos(x), axis=-1),
        v_grad=lambda x: w2 * np.asarray(x, dtype=float) - eps * np.sin(x),
        v_hess=lambda x: np.diag(w2 - eps * np.cos(np.asarray(x, dtype=float))),
        hessian_bounds=(w2 - abs(eps), w2 + abs(eps)),
        name=f"cos_perturbed(omega={omega:g}, eps={eps:g})",
        parameters={"kind": "kfp_perturbed", "omega": float(omega), "epsilon": eps, "n": n},
    )


def build_operator(pot: PotentialSpec) -> DiffusionOperator:
    """Kinetic Fokker-Planck generator on (x, v) in R^{2n}.

    Drift (v, -v - grad V(x)), diffusion diag(0_n, I_n), Jacobian
    [[0, I], [-hess V(x), -I]].
    """
    n = pot.n
    diffusion = np.zeros((2 * n, 2 * n))
    diffusion[n:, n:] = np.eye(n)

    def drift(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        x, v = z[..., :n], z[..., n:]
        return np.concatenate([v, -v - pot.v_grad(x)], axis=-1)

    def jacobian(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        J = np.zeros((2 * n, 2 * n))
        J[:n, n:] = np.eye(n)
        J[n:, :n] = -pot.v_hess(z[:n])
        J[n:, n:] = -np.eye(n)
        return J

    linear = None
    if pot.is_quadratic:
        linear = jacobian(np.zeros(2 * n))

    return DiffusionOperator(
        dim=2 * n,
        diffusion=diffusion,
        drift=drift,
        drift_jacobian=jacobian,
        name=f"kfp[{pot.name}]",
        linear_matrix=linear,
        parameters=dict(pot.parameters),
    )


def kfp_jacobian(lam: float, n: int = 1) -> np.ndarray:
    """SDE-frame Jacobian [[0, I], [-lam I, -I]] for a Hessian eigenvalue lam."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -lam * np.eye(n)
    J[n:, n:] = -np.eye(n)
    return J


@dataclass
class KfpParams:
    """Twist coefficients, metric and rate of a kinetic certificate."""
    m: float
    M: float
    slack: float
    m_eff: float
    M_eff: float
    alpha: float
    beta: float
    gamma: float
    delta: float
    a: float
    b: float
    kappa: float
    theta: float
    S: MetricForm
    rho: float
    c1: float
    n: int = 1
    root: str = "larger"
    slack_dropped: bool = False
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def S2(self) -> np.ndarray:
        return np.array([[1.0, self.a], [self.a, self.b]])

    def sde_metric(self) -> MetricForm:
        """[[1, -a], [-a, b]] (x) I_n, the metric for ``build_operator``."""
        return MetricForm(np.kron(np.array([[1.0, -self.a], [-self.a, self.b]]), np.eye(self.n)))

    def euclidean_constants(self) -> Tuple[float, float]:
        """(C1, C2) with W2(P*mu, P*nu) <= C1 exp(-C2 t) W2(mu, nu) in the Euclidean metric."""
        return self.c1, self.rho

    def gamma_bound(self) -> float:
        """Smallest a_gamma with Gamma <= a_gamma T: 1 / (b - a^2)."""
        return 1.0 / (self.b - self.a ** 2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.m, "M": self.M, "slack": self.slack,
            "m_eff": self.m_eff, "M_eff": self.M_eff,
            "alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "delta": self.delta,
            "a": self.a, "b": self.b, "kappa": self.kappa, "theta": self.theta,
            "S": self.S.matrix.tolist(), "rho": self.rho, "c1": self.c1, "n": self.n,
            "root": self.root, "slack_dropped": self.slack_dropped,
            "provenance": self.provenance,
        }


def kfp_form(a: float, b: float, lam: float) -> np.ndarray:
    """Lower-bound form per Hessian eigenvalue lam, acting on (g_x, g_v)."""
    off = 0.5 * (a + b - lam)
    return np.array([[a, off], [off, b - a * lam]])


def kfp_window(params: KfpParams) -> Tuple[float, float]:
    """Interval of lam on which ``kfp_form`` is positive definite: kappa -+ sqrt(kappa^2 - theta^2)."""
    half = math.sqrt(max(params.kappa ** 2 - params.theta ** 2, 0.0))
    return params.kappa - half, params.kappa + half


def rate_at(a: float, b: float, lam: float) -> float:
    """Smallest generalized eigenvalue of (kfp_form(lam), S2)."""
    S2 = np.array([[1.0, a], [a, b]])
    return float(eigh(kfp_form(a, b, lam), S2, eigvals_only=True).min())


def rate_profile(params: KfpParams, lams: np.ndarray) -> np.ndarray:
    return np.array([rate_at(params.a, params.b, float(l)) for l in lams])


def contraction_rate(params: KfpParams) -> float:
    """rho = min over lam in {m, M} of the smallest eigenvalue of the pencil.

    The pencil is affine in lam so its smallest eigenvalue is concave and the
    minimum over [m, M] sits at an endpoint. The bounds are the actual Hessian
    bounds, which lie inside the widened interval the twist was solved for.
    """
    return max(min(rate_at(params.a, params.b, params.m),
                   rate_at(params.a, params.b, params.M)), 0.0)


def _assemble(m: float, M: float, slack: float, m_eff: float, M_eff: float,
              a: float, n: int, root: str, slack_dropped: bool) -> KfpParams:
    b = a + math.sqrt(m_eff * M_eff)
    S = MetricForm(np.kron(np.array([[1.0, a], [a, b]]), np.eye(n)))
    params = KfpParams(
        m=m, M=M, slack=slack, m_eff=m_eff, M_eff=M_eff,
        alpha=1.0, beta=a, gamma=0.0, delta=math.sqrt(b - a * a),
        a=a, b=b, kappa=a + b - 2 * a * a, theta=b - a,
        S=S, rho=0.0, c1=math.sqrt(S.cond), n=n, root=root, slack_dropped=slack_dropped,
    )
    params.rho = 0.0 if slack_dropped else contraction_rate(params)
    return params


def solve_kfp_params(m: float, M: float, slack: float = 0.05, n: int = 1) -> KfpParams:
    """Solve the twist system for Hessian bounds widened to [m(1-slack), M(1+slack)]."""
    if m <= 0 or M < m:
        raise ContractViolationError(f"Hessian bounds must satisfy 0 < m <= M, got ({m}, {M})")
    if not 0.0 <= slack < 1.0:
        raise ContractViolationError(f"slack must lie in [0, 1), got {slack}")

    gap = math.sqrt(M) - math.sqrt(m)
    if gap > 1.0:
        raise InfeasibleCertificateError(
            f"Hessian bounds ({m}, {M}) give sqrt(M) - sqrt(m) = {gap:.6f} > 1",
            condition=KFP_CONDITION, values={"m": m, "M": M, "gap": gap},
        )

    slack_dropped = False
    m_eff, M_eff = m * (1.0 - slack), M * (1.0 + slack)
    d = math.sqrt(M_eff) - math.sqrt(m_eff)
    if d > 1.0:
        logger.warning(
            f"Widening by slack={slack} breaks {KFP_CONDITION} (gap {d:.6f}); "
            f"falling back to zero slack, rate reported as 0"
        )
        slack_dropped = True
        m_eff, M_eff = m, M
        d = gap

    disc = math.sqrt(max(1.0 - d * d, 0.0))
    candidates: List[KfpParams] = [
        _assemble(m, M, slack, m_eff, M_eff, 0.5 * (1.0 + disc), n, "larger", slack_dropped)
    ]
    a_small = 0.5 * (1.0 - disc)
    if a_small > 0.0 and disc > 0.0:
        candidates.append(
            _assemble(m, M, slack, m_eff, M_eff, a_small, n, "smaller", slack_dropped)
        )

    best = candidates[0]
    for cand in candidates[1:]:
        if cand.rho > best.rho + 1e-12:
            best = cand
    best.provenance = {
        "hessian_bounds": [m, M],
        "slack": slack,
        "widened_bounds": [m_eff, M_eff],
        "root_rates": {c.root: c.rho for c in candidates},
        "root_choice": best.root,
        "tie_break": "larger root kept unless the smaller root has a strictly larger rate",
        "slack_dropped": slack_dropped,
    }
    logger.info(
        f"KFP certificate for m={m}, M={M}, slack={slack}: a={best.a:.6f}, b={best.b:.6f}, "
        f"rho={best.rho:.6g} ({best.root} root)"
    )
    return best
