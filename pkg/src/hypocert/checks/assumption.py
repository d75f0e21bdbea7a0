"""Standing assumptions: Lyapunov function and, for kinetic operators, Hessian bounds."""

from typing import Any, Dict, Optional

import numpy as np

from ..certificates.kfp import PotentialSpec
from ..certificates.lyapunov import LyapunovCandidate, check_assumption, sample_ball
from ..core.base import Check, RunContext, VerificationReport, Verdict
from ..core.operator import DiffusionOperator, MetricForm


def check_standing_assumptions(op: DiffusionOperator, S: MetricForm, candidate: Optional[LyapunovCandidate] = None,
                               radius: float = 20.0, n_points: int = 10_000, seed: int = 0,
                               potential: Optional[PotentialSpec] = None) -> VerificationReport:
    candidate = candidate or LyapunovCandidate.standard(op.dim)
    sample = sample_ball(op.dim, radius, n_points, seed)
    report = check_assumption(candidate, op, S, sample).to_report("assumption")
    report.provenance.update({"radius": radius, "seed": seed})

    if potential is not None:
        # Hessian bounds of V on the position marginal of the same sample
        positions = sample[: min(len(sample), 2000), : potential.n]
        violation = potential.bound_violation(positions)
        report.details["hessian_bound_violation"] = violation
        if violation > 1e-12:
            report.verdict = Verdict.FAIL
            report.details["reason"] = f"Hessian of V leaves [m, M] by {violation:.3e}"
    return report


class AssumptionCheck(Check):
    """Sampled check of the Lyapunov assumption U >= 1, T(U) <= C U, L U <= C U."""

    def __init__(self) -> None:
        super().__init__(
            name="assumption",
            description="Estimate the Lyapunov constant of U(z) = 1 + |z|^2 on a quasi-random sample"
        )

    def validate_input(self, **kwargs: Any) -> bool:
        return kwargs.get("operator") is not None and kwargs.get("metric") is not None \
            and int(kwargs.get("sample_points", 1)) >= 1

    def execute(self, context: RunContext, **kwargs: Any) -> VerificationReport:
        if not self.validate_input(**kwargs):
            return self._invalid_input(**kwargs)
        op: DiffusionOperator = kwargs["operator"]
        candidate = kwargs.get("lyapunov")
        if candidate is None:
            candidate = LyapunovCandidate.standard(op.dim)
        elif isinstance(candidate, dict):
            candidate = LyapunovCandidate.quadratic_form(
                np.asarray(candidate["matrix"], dtype=float), float(candidate.get("constant", 1.0)),
                candidate.get("claimed_c"))
        return check_standing_assumptions(
            op, kwargs["metric"], candidate,
            radius=float(kwargs.get("sample_radius", 20.0)),
            n_points=int(kwargs.get("sample_points", 10_000)),
            seed=int(kwargs.get("seed", 0)),
            potential=kwargs.get("potential"),
        )

    def _get_parameter_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "operator": {"type": "object"},
                "metric": {"type": "object"},
                "sample_radius": {"type": "number", "default": 20.0},
                "sample_points": {"type": "integer", "default": 10000},
                "lyapunov": {"type": "object", "description": "matrix, constant, claimed_c"},
                "seed": {"type": "integer"},
            },
            "required": ["operator", "metric"],
        }
