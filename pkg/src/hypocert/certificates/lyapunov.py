"""Sampled check of the Lyapunov-function assumption.

U must satisfy U >= 1, T(U) <= C U and LU <= C U, with compact sublevel sets.
The first three are checked on a quasi-random sample of a ball. Compactness
is decided by membership in the registered family of convex quadratics
U = c + z^T Q z / 2 with Q >= 0 (compact sublevels exactly when Q > 0).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from ..core.base import VerificationReport, Verdict
from ..core.errors import ContractViolationError
from ..core.operator import DiffusionOperator, MetricForm
from ..functions.testfn import RidgePolynomial, TestFunction

logger = logging.getLogger(__name__)

REGISTERED_FAMILY = "convex_quadratic"


@dataclass
class LyapunovCandidate:
    """Candidate U with an optional claimed constant C."""
    u: TestFunction
    claimed_c: Optional[float] = None
    family: Optional[str] = None
    quadratic: Optional[np.ndarray] = None

    @classmethod
    def quadratic_form(cls, Q: np.ndarray, constant: float = 1.0,
                       claimed_c: Optional[float] = None) -> "LyapunovCandidate":
        """U = constant + z^T Q z / 2; registered when Q is positive semidefinite."""
        Q = 0.5 * (np.asarray(Q, float) + np.asarray(Q, float).T)
        family = REGISTERED_FAMILY if np.linalg.eigvalsh(Q).min() >= -1e-12 else None
        if np.any(Q):
            u: TestFunction = RidgePolynomial.from_quadratic(Q, constant=constant)
        else:
            u = RidgePolynomial.constant_function(Q.shape[0], constant)
        return cls(u=u, claimed_c=claimed_c, family=family, quadratic=Q)

    @classmethod
    def standard(cls, dim: int, claimed_c: Optional[float] = None) -> "LyapunovCandidate":
        """U(z) = 1 + |z|^2."""
        return cls.quadratic_form(2.0 * np.eye(dim), 1.0, claimed_c)

    @property
    def registered(self) -> bool:
        return self.family == REGISTERED_FAMILY

    @property
    def compact_sublevels(self) -> bool:
        return (self.registered and self.quadratic is not None
                and bool(np.linalg.eigvalsh(self.quadratic).min() > 0.0))


@dataclass
class LyapunovResult:
    c_hat: float
    verdict: Verdict
    min_u: float
    witness: Optional[np.ndarray]
    compact_sublevels: bool
    n_points: int
    details: Dict[str, Any] = field(default_factory=dict)

    def to_report(self, check_name: str = "assumption") -> VerificationReport:
        margin = self.min_u - 1.0
        return VerificationReport(
            check_name=check_name,
            verdict=self.verdict,
            margin=margin,
            tolerance=1e-12,
            provenance={"n_points": self.n_points, "scope": "sampled, not global"},
            details={
                "c_hat": self.c_hat,
                "min_u": self.min_u,
                "witness": None if self.witness is None else self.witness.tolist(),
                "compact_sublevels": self.compact_sublevels,
                **self.details,
            },
        )


def sample_ball(dim: int, radius: float = 20.0, n_points: int = 10_000, seed: int = 0) -> np.ndarray:
    """Scrambled Sobol points mapped into the ball of given radius."""
    if n_points < 1:
        raise ContractViolationError("sample must be non-empty")
    sobol = qmc.Sobol(d=dim + 1, scramble=True, seed=seed)
    cube = sobol.random_base2(m=max(int(math.ceil(math.log2(n_points))), 1))[:n_points]
    cube = np.clip(cube, 1e-12, 1.0 - 1e-12)
    direction = ndtri(cube[:, :dim])
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * cube[:, dim:] ** (1.0 / dim)
    return direction * r


def lyapunov_ratios(cand: LyapunovCandidate, op: DiffusionOperator, S: MetricForm,
                    sample: np.ndarray) -> Dict[str, np.ndarray]:
    """U, T(U)/U and LU/U at every sample point."""
    z = np.atleast_2d(np.asarray(sample, dtype=float))
    if z.shape[1] != op.dim or cand.u.arity != op.dim or S.dim != op.dim:
        raise ContractViolationError("candidate, operator, metric and sample dimensions differ")
    u = cand.u.value(z)
    g = cand.u.grad(z)
    h = cand.u.hess(z)
    t_u = np.einsum("ni,ij,nj->n", g, S.matrix, g)
    l_u = np.einsum("ij,nij->n", op.diffusion, h) + np.einsum("ni,ni->n", op.drift(z), g)
    return {"u": u, "t_ratio": t_u / u, "l_ratio": l_u / u}


def check_assumption(cand: LyapunovCandidate, op: DiffusionOperator, S: MetricForm,
                     sample: np.ndarray) -> LyapunovResult:
    """Estimate C = max over the sample of max(T(U)/U, LU/U, 0) and judge the candidate."""
    z = np.atleast_2d(np.asarray(sample, dtype=float))
    if z.shape[0] == 0:
        raise ContractViolationError("sample must be non-empty")
    ratios = lyapunov_ratios(cand, op, S, z)
    u = ratios["u"]
    min_idx = int(np.argmin(u))
    min_u = float(u[min_idx])

    per_point = np.maximum(np.maximum(ratios["t_ratio"], ratios["l_ratio"]), 0.0)
    c_hat = float(per_point.max())
    details: Dict[str, Any] = {"registered_family": cand.registered}

    if min_u < 1.0:
        logger.info(f"Lyapunov candidate below 1 at sample point {min_idx}: U = {min_u:.6g}")
        return LyapunovResult(c_hat=c_hat, verdict=Verdict.FAIL, min_u=min_u,
                              witness=z[min_idx].copy(), compact_sublevels=cand.compact_sublevels,
                              n_points=len(z), details={**details, "reason": "U < 1"})

    verdict = Verdict.PASS
    if not np.isfinite(c_hat):
        verdict = Verdict.FAIL
        details["reason"] = "non-finite ratio"
    elif not cand.registered:
        verdict = Verdict.FAIL
        details["reason"] = "candidate is outside the registered family"
    elif cand.claimed_c is not None and c_hat > cand.claimed_c:
        verdict = Verdict.FAIL
        details["reason"] = f"estimated C exceeds claimed C = {cand.claimed_c}"
        details["witness_ratio_index"] = int(np.argmax(per_point))

    return LyapunovResult(c_hat=c_hat, verdict=verdict, min_u=min_u, witness=None,
                          compact_sublevels=cand.compact_sublevels, n_points=len(z),
                          details=details)
