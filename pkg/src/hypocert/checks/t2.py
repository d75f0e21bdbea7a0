"""Pointwise curvature check T2(f) >= rho T(f) on random test functions."""

import logging
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..core.base import Check, RunContext, VerificationReport, Verdict
from ..core.operator import DiffusionOperator, MetricForm, t2_finite_difference, t2_form
from ..functions.testfn import FunctionFamily, sample_ball, sample_function, standard_families

logger = logging.getLogger(__name__)

T2_TOLERANCE = 1e-8
FD_TOLERANCE = 1e-4


def check_t2_inequality(op: DiffusionOperator, S: MetricForm, rho: float, trials: int, seed: int,
                        radius: float = 2.0, families: Optional[Sequence[FunctionFamily]] = None,
                        tolerance: float = T2_TOLERANCE, fd_tolerance: float = FD_TOLERANCE
                        ) -> VerificationReport:
    """min over sampled (f, x) of T2(f)(x) - rho T(f)(x), with a finite-difference audit of T2."""
    if trials < 1:
        return VerificationReport.from_error("t2", "trials must be at least 1")
    families = list(families) if families is not None else standard_families()
    rng = np.random.default_rng(seed)
    fn_seeds = rng.integers(0, 2 ** 32, size=trials)
    points = sample_ball(rng, op.dim, radius, trials)

    worst = np.inf
    witness: Dict[str, Any] = {}
    worst_fd = 0.0
    per_family: Dict[str, float] = {}
    for i in range(trials):
        family = families[i % len(families)]
        f = sample_function(family, op.dim, int(fn_seeds[i]))
        x = points[i]
        t2 = t2_form(op, S, f, x)
        g = f.grad(x)
        t_val = float(g @ S.matrix @ g)
        margin = t2 - rho * t_val

        t2_fd = t2_finite_difference(op, S, f, x)
        fd_err = abs(t2 - t2_fd) / (1.0 + abs(t2))
        worst_fd = max(worst_fd, fd_err)

        per_family[family.kind] = min(per_family.get(family.kind, np.inf), margin)
        if margin < worst:
            worst = margin
            witness = {
                "trial": i,
                "point": x.tolist(),
                "function": f.describe(),
                "family": family.kind,
                "compact_support": family.compact_support,
                "t2": t2,
                "t": t_val,
            }

    report = VerificationReport.from_margin(
        "t2", worst, tolerance,
        provenance={"seed": seed, "trials": trials, "radius": radius, "rho": rho,
                    "fd_tolerance": fd_tolerance},
        details={"witness": witness, "max_fd_error": worst_fd, "margin_by_family": per_family},
    )
    if worst_fd > fd_tolerance:
        report.verdict = Verdict.FAIL
        report.details["reason"] = "analytic T2 disagrees with the finite-difference oracle"
        logger.warning(f"T2 finite-difference mismatch {worst_fd:.3e} on {op.name}")
    elif report.failed:
        logger.info(f"T2 >= {rho:.6g} T violated on {op.name}: margin {worst:.3e} ({witness['family']})")
    return report


class T2Check(Check):
    """Check of the curvature inequality T2 >= rho T."""

    def __init__(self) -> None:
        super().__init__(
            name="t2",
            description="Sample test functions and points, verify T2(f) - rho T(f) >= 0"
        )

    def validate_input(self, **kwargs: Any) -> bool:
        if kwargs.get("operator") is None or kwargs.get("metric") is None:
            return False
        if kwargs.get("rho") is None:
            return False
        return int(kwargs.get("trials", 1)) >= 1

    def execute(self, context: RunContext, **kwargs: Any) -> VerificationReport:
        if not self.validate_input(**kwargs):
            return self._invalid_input(**kwargs)
        tolerances = kwargs.get("tolerances") or {}
        return check_t2_inequality(
            kwargs["operator"], kwargs["metric"], float(kwargs["rho"]),
            trials=int(kwargs.get("trials", 500)), seed=int(kwargs.get("seed", 0)),
            tolerance=float(tolerances.get("t2", T2_TOLERANCE)),
            fd_tolerance=float(tolerances.get("fd", FD_TOLERANCE)),
        )

    def _get_parameter_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "operator": {"type": "object", "description": "DiffusionOperator under test"},
                "metric": {"type": "object", "description": "MetricForm Sigma"},
                "rho": {"type": "number", "description": "Claimed rate"},
                "trials": {"type": "integer", "minimum": 1, "default": 500},
                "seed": {"type": "integer", "default": 0},
                "tolerances": {"type": "object", "description": "Keys 't2' and 'fd'"},
            },
            "required": ["operator", "metric", "rho"],
        }
