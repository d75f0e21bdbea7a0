"""Semantic validation of parsed scenarios."""

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..core.base import CheckRegistry
from ..core.errors import ScenarioError
from .config import Scenario

QUADRATIC_KINDS = ("kfp_quadratic",)
KINETIC_KINDS = ("kfp_quadratic", "kfp_perturbed")
LINEAR_KINDS = ("kfp_quadratic", "kolmogorov", "ou")

# numerics read by the certificate stage rather than by a check
CERTIFICATE_NUMERICS = {"seed", "slack", "sample_radius", "sample_points", "dt"}


@dataclass
class ValidatorConfig:
    """Configuration for scenario validation."""
    strict_mode: bool = True
    audit_log: Optional[str] = None
    max_particle_steps: float = 1e10


@dataclass
class SchemaViolation:
    """Record of a scenario that cannot be run as written."""
    timestamp: float
    violation_type: str
    description: str
    context: Dict[str, Any]
    severity: str  # 'low', 'high'


class ScenarioValidator:
    """Checks that every selected check has its inputs and that numerics are sane."""

    def __init__(self, registry: CheckRegistry, config: Optional[ValidatorConfig] = None):
        self.config = config or ValidatorConfig()
        self.registry = registry
        self.violations: List[SchemaViolation] = []
        self.logger = logging.getLogger(__name__)

        if self.config.audit_log:
            self._setup_audit_logging(Path(self.config.audit_log))

    def _setup_audit_logging(self, path: Path) -> None:
        """Set up audit logging."""
        path.parent.mkdir(parents=True, exist_ok=True)
        audit_handler = logging.FileHandler(path)
        audit_handler.setLevel(logging.INFO)
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
        audit_handler.setFormatter(formatter)
        self.logger.addHandler(audit_handler)
        self.logger.setLevel(logging.INFO)

    def validate(self, scenario: Scenario) -> List[SchemaViolation]:
        """Validate a scenario; in strict mode the first high-severity violation raises."""
        before = len(self.violations)
        self._validate_checks(scenario)
        self._validate_certificate(scenario)
        self._validate_numerics(scenario)
        found = self.violations[before:]
        if not found:
            self.logger.info(f"Scenario '{scenario.name}' validated: checks {', '.join(scenario.checks)}")
        return found

    def _validate_checks(self, scenario: Scenario) -> None:
        kind = scenario.operator.kind
        if not scenario.checks:
            self._record_violation("no_checks", "scenario selects no checks", {}, "high")
        for name in scenario.checks:
            if self.registry.get_check(name) is None:
                self._record_violation("unknown_check", f"check '{name}' is not registered",
                                       {"check": name}, "high")
            if name in ("poincare", "h1") and kind not in QUADRATIC_KINDS:
                self._record_violation(
                    "missing_input", f"check '{name}' needs a quadratic potential, operator is '{kind}'",
                    {"check": name, "operator": kind}, "high")
            if name == "derivative" and kind not in LINEAR_KINDS:
                self._record_violation(
                    "missing_input", f"check 'derivative' needs linear drift, operator is '{kind}'",
                    {"check": name, "operator": kind}, "high")

    def _validate_certificate(self, scenario: Scenario) -> None:
        cert = scenario.certificate
        kind = scenario.operator.kind
        if cert.source == "closed_form" and kind not in KINETIC_KINDS:
            self._record_violation(
                "certificate_mismatch", f"closed-form certificates exist only for kinetic operators, not '{kind}'",
                {"source": cert.source, "operator": kind}, "high")
        if cert.hessian_bounds is not None:
            m, M = cert.hessian_bounds
            if not 0 < m <= M:
                self._record_violation("invalid_value", f"hessian_bounds need 0 < m <= M, got ({m}, {M})",
                                       {"m": m, "M": M}, "high")
        if cert.samples < 1 or cert.max_iters < 1 or cert.tol <= 0:
            self._record_violation("invalid_value", "sigma search needs samples, max_iters >= 1 and tol > 0",
                                   {"samples": cert.samples, "max_iters": cert.max_iters}, "high")

    def _validate_numerics(self, scenario: Scenario) -> None:
        num = scenario.numerics
        problems = []
        if num.N < 2:
            problems.append("N must be at least 2")
        if num.dt <= 0 or num.t_end <= 0 or num.burn_in <= 0 or num.sample_radius <= 0:
            problems.append("dt, t_end, burn_in and sample_radius must be positive")
        if not num.times or any(t < 0 for t in num.times) or \
                any(b <= a for a, b in zip(num.times, num.times[1:])):
            problems.append("times must be non-negative and strictly increasing")
        if not 0.0 <= num.slack < 1.0:
            problems.append("slack must lie in [0, 1)")
        if min(num.trials, num.replicates, num.points, num.test_functions, num.sample_points) < 1:
            problems.append("trials, replicates, points, test_functions and sample_points must be >= 1")
        if num.b_weight < 0 or num.k2 < 0:
            problems.append("b_weight and k2 must be non-negative")
        for problem in problems:
            self._record_violation("invalid_value", problem, {"field": "numerics"}, "high")

        steps = int(max(num.times + [num.t_end, num.burn_in]) / num.dt) if num.dt > 0 else 0
        if num.N * steps > self.config.max_particle_steps:
            self._record_violation("budget", f"{num.N} particles x {steps} steps exceeds the limit",
                                   {"N": num.N, "steps": steps}, "high")
        for key in scenario.numerics_set:
            if key not in self._consumed_numerics(scenario):
                self._record_violation(
                    "unused_field", f"numerics field '{key}' is not read by any selected check",
                    {"field": key, "checks": scenario.checks}, "low")

    def _consumed_numerics(self, scenario: Scenario) -> set:
        consumed = set(CERTIFICATE_NUMERICS)
        for name in scenario.checks:
            check = self.registry.get_check(name)
            if check is not None:
                consumed.update(check.get_schema()["parameters"].get("properties", {}))
        return consumed

    def _record_violation(self, violation_type: str, description: str, context: Dict[str, Any],
                          severity: str) -> None:
        """Record a violation."""
        violation = SchemaViolation(time.time(), violation_type, description, context, severity)
        self.violations.append(violation)
        self.logger.warning(f"Scenario violation: {violation_type} - {description}")

        if self.config.strict_mode and severity == "high":
            raise ScenarioError(description, field=context.get("field") or context.get("check"))

    def get_violations(self, severity: Optional[str] = None) -> List[SchemaViolation]:
        """Get recorded violations, optionally filtered by severity."""
        if severity:
            return [v for v in self.violations if v.severity == severity]
        return self.violations.copy()

    def get_violation_summary(self) -> Dict[str, Any]:
        return {
            "total_violations": len(self.violations),
            "violations_by_type": {
                violation_type: len([v for v in self.violations if v.violation_type == violation_type])
                for violation_type in sorted({v.violation_type for v in self.violations})
            },
            "strict_mode": self.config.strict_mode,
        }
