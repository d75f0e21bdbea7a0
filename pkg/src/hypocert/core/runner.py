"""Scenario orchestration: certificate stage, check dispatch, report files."""

import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..certificates.kfp import PotentialSpec, solve_kfp_params
from ..certificates.lyapunov import sample_ball
from ..certificates.sigma import (
    InfeasibilityReport, SigmaSearchOptions, certificate_rate, find_sigma, sample_jacobians,
)
from ..checks import check_equivalence, default_checks
from ..dynamics.sde import SdeSystem
from ..scenario.config import Scenario, load_scenario
from ..scenario.registry import build_from_spec
from ..scenario.validator import ScenarioValidator, ValidatorConfig
from .base import CheckRegistry, RunContext, VerificationReport, Verdict, to_jsonable
from .errors import ContractViolationError, InfeasibleCertificateError, ScenarioError
from .operator import DiffusionOperator, MetricForm, gamma_bound, t2_rate

SIGMA_CONDITION = "-sym(J_k Sigma) positive definite on every Jacobian sample"
RATE_CHECKS = ("t2", "gradient_bound", "derivative", "wasserstein", "invariant", "poincare", "h1")
SERIES_HEADER = ["check", "time", "value", "stderr", "seed"]


@dataclass
class RunnerConfig:
    """Configuration for the scenario runner."""
    output_directory: str = "hypocert-out"
    jobs: int = 1
    write_outputs: bool = True
    verbose_logging: bool = False
    validator_config: Optional[ValidatorConfig] = None


@dataclass
class CertificateRecord:
    """Metric and rate handed to every check of a run."""
    source: str
    metric: MetricForm
    rho: float
    a_gamma: float
    prefactor: Optional[float] = None
    slack_dropped: bool = False
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "feasible": True,
            "source": self.source,
            "metric": self.metric.matrix.tolist(),
            "rho": self.rho,
            "K": -self.rho,
            "a_gamma": self.a_gamma,
            "prefactor": self.prefactor,
            "slack_dropped": self.slack_dropped,
            "details": self.details,
        }


@dataclass
class RunResult:
    """Outcome of one scenario run."""
    scenario: Scenario
    exit_code: int
    reports: List[VerificationReport] = field(default_factory=list)
    certificate: Dict[str, Any] = field(default_factory=dict)
    elapsed: float = 0.0
    check_seconds: Dict[str, float] = field(default_factory=dict)
    paths: Dict[str, Path] = field(default_factory=dict)

    @property
    def failed_checks(self) -> List[str]:
        return [r.check_name for r in self.reports if r.verdict == Verdict.FAIL]

    @property
    def inconclusive_checks(self) -> List[str]:
        return [r.check_name for r in self.reports if r.verdict == Verdict.INCONCLUSIVE]

    def report(self, name: str) -> Optional[VerificationReport]:
        return next((r for r in self.reports if r.check_name == name), None)

    def to_document(self) -> Dict[str, Any]:
        """Everything reproducible about the run; timing lives in the meta file."""
        return to_jsonable({
            "scenario": self.scenario.to_dict(),
            "certificate": self.certificate,
            "reports": [r.to_dict() for r in self.reports],
            "summary": {
                "exit_code": self.exit_code,
                "verdicts": {r.check_name: r.verdict for r in self.reports},
                "failed": self.failed_checks,
                "inconclusive": self.inconclusive_checks,
            },
        })


class ScenarioRunner:
    """Builds the certificate for a scenario and runs its checks."""

    def __init__(self, config: Optional[RunnerConfig] = None):
        self.config = config or RunnerConfig()
        self.output_directory = Path(self.config.output_directory).resolve()
        self.logger = logging.getLogger(__name__)
        if self.config.verbose_logging:
            logging.basicConfig(level=logging.INFO)

        self.check_registry = CheckRegistry()
        self._register_default_checks()
        self.validator = ScenarioValidator(self.check_registry, self.config.validator_config)

    def _register_default_checks(self) -> None:
        """Register default checks."""
        checks = default_checks()
        for check in checks:
            self.check_registry.register(check)
        self.logger.debug(f"Registered {len(checks)} checks")

    def run(self, scenario: Scenario) -> RunResult:
        """Validate, certify, check and (optionally) write report files."""
        started = time.perf_counter()
        self.validator.validate(scenario)
        op, pot = build_from_spec(scenario.operator)

        try:
            cert = self.build_certificate(scenario, op, pot)
        except InfeasibleCertificateError as exc:
            self.logger.error(f"Certificate stage infeasible for '{scenario.name}': {exc}")
            result = RunResult(
                scenario=scenario, exit_code=1,
                certificate={"feasible": False, "source": scenario.certificate.source,
                             "message": str(exc), "condition": exc.condition, "values": exc.values},
                elapsed=time.perf_counter() - started,
            )
            return self._finish(result)

        reports, timings = self._run_checks(scenario, op, pot, cert)
        exit_code = 1 if any(r.verdict == Verdict.FAIL for r in reports) else 0
        result = RunResult(scenario=scenario, exit_code=exit_code, reports=reports,
                           certificate=cert.to_dict(), elapsed=time.perf_counter() - started,
                           check_seconds=timings)
        if result.inconclusive_checks:
            self.logger.warning(f"Inconclusive checks: {', '.join(result.inconclusive_checks)}")
        return self._finish(result)

    def _finish(self, result: RunResult) -> RunResult:
        if self.config.write_outputs:
            result.paths = self.write_outputs(result)
        self.logger.info(f"Scenario '{result.scenario.name}' finished with exit code {result.exit_code} "
                         f"in {result.elapsed:.2f}s")
        return result

    def build_certificate(self, scenario: Scenario, op: DiffusionOperator,
                          pot: Optional[PotentialSpec]) -> CertificateRecord:
        """Certificate stage: closed form, metric search or user-supplied metric."""
        spec = scenario.certificate
        num = scenario.numerics

        if spec.source == "closed_form":
            if pot is None:
                raise ScenarioError("closed-form certificates need a kinetic potential", field="source")
            m, M = spec.hessian_bounds or pot.hessian_bounds
            params = solve_kfp_params(m, M, num.slack, n=pot.n)
            c1, _ = params.euclidean_constants()
            return CertificateRecord(
                source=spec.source, metric=params.sde_metric(), rho=params.rho,
                a_gamma=params.gamma_bound(), prefactor=c1, slack_dropped=params.slack_dropped,
                details=params.to_dict(),
            )

        jacobians = self._jacobian_samples(op, spec.samples, num.sample_radius, num.seed)
        if spec.source == "sigma_search":
            found = find_sigma(jacobians, SigmaSearchOptions(max_iters=spec.max_iters, tol=spec.tol))
            if isinstance(found, InfeasibilityReport):
                raise InfeasibleCertificateError(found.message, condition=SIGMA_CONDITION,
                                                 values=found.to_dict())
            metric = found.metric()
            details = found.to_dict()
            rho = certificate_rate(found, jacobians)
        else:
            try:
                metric = MetricForm(np.asarray(spec.metric, dtype=float))
            except ContractViolationError as exc:
                raise ScenarioError(f"user-supplied metric rejected: {exc}", field="metric") from exc
            if metric.dim != op.dim:
                raise ScenarioError(f"metric has dimension {metric.dim}, operator has {op.dim}",
                                    field="metric")
            sampled = min(t2_rate(J, metric) for J in jacobians)
            rho = spec.rho if spec.rho is not None else sampled
            details = {"sampled_rate": sampled, "rate_claimed": spec.rho is not None}

        return CertificateRecord(
            source=spec.source, metric=metric, rho=float(rho),
            a_gamma=gamma_bound(op.diffusion, metric), details=details,
        )

    @staticmethod
    def _jacobian_samples(op: DiffusionOperator, count: int, radius: float, seed: int
                          ) -> List[np.ndarray]:
        if op.is_linear:
            return [np.array(op.linear_matrix, dtype=float)]
        return sample_jacobians(op.drift_jacobian, sample_ball(op.dim, radius, count, seed))

    def check_arguments(self, scenario: Scenario, op: DiffusionOperator, pot: Optional[PotentialSpec],
                        cert: CertificateRecord) -> Dict[str, Any]:
        """Keyword arguments shared by every check."""
        num = scenario.numerics
        if pot is not None and scenario.certificate.hessian_bounds is not None:
            # the assumption check tests V against the bounds the certificate was built for
            pot = dataclasses.replace(pot, hessian_bounds=scenario.certificate.hessian_bounds)
        kwargs: Dict[str, Any] = {
            "operator": op,
            "system": SdeSystem.from_operator(op),
            "potential": pot,
            "metric": cert.metric,
            "rho": cert.rho,
            "a_gamma": cert.a_gamma,
            "lyapunov": scenario.lyapunov,
        }
        if cert.prefactor is not None:
            kwargs["prefactor"] = cert.prefactor
        for numerics_field in dataclasses.fields(num):
            kwargs[numerics_field.name] = getattr(num, numerics_field.name)
        return kwargs

    def _run_checks(self, scenario: Scenario, op: DiffusionOperator, pot: Optional[PotentialSpec],
                    cert: CertificateRecord) -> Tuple[List[VerificationReport], Dict[str, float]]:
        context = RunContext(
            output_directory=self.output_directory,
            scenario_name=scenario.name,
            jobs=max(self.config.jobs, 1),
            metadata={"certificate_source": cert.source},
        )
        kwargs = self.check_arguments(scenario, op, pot, cert)

        with ThreadPoolExecutor(max_workers=context.jobs) as pool:
            futures = {name: pool.submit(self._execute_check, name, context, kwargs)
                       for name in scenario.checks}
            outcomes = {name: future.result() for name, future in futures.items()}

        by_name = {name: report for name, (report, _) in outcomes.items()}
        timings = {name: seconds for name, (_, seconds) in outcomes.items()}
        if cert.slack_dropped:
            self._downgrade_rate_checks(by_name)
        if any(name in by_name for name in ("t2", "gradient_bound", "wasserstein")):
            by_name["equivalence"] = check_equivalence(by_name)
        return [by_name[name] for name in sorted(by_name)], timings

    def _execute_check(self, name: str, context: RunContext, kwargs: Dict[str, Any]
                       ) -> Tuple[VerificationReport, float]:
        check = self.check_registry.get_check(name)
        started = time.perf_counter()
        if check is None:
            return VerificationReport.from_error(name, f"Check not found: {name}"), 0.0
        try:
            self.logger.info(f"Running check '{name}' for scenario '{context.scenario_name}'")
            report = check.execute(context, **kwargs)
        except Exception as e:
            self.logger.error(f"Check '{name}' raised: {e}")
            report = VerificationReport.from_error(name, f"{type(e).__name__}: {e}")
        seconds = time.perf_counter() - started
        self.logger.info(f"Check '{name}': {report.verdict.value} (margin {report.margin:.3e}, "
                         f"{seconds:.2f}s)")
        return report, seconds

    def _downgrade_rate_checks(self, reports: Dict[str, VerificationReport]) -> None:
        """A rate forced to zero by dropped slack cannot certify anything."""
        for name in RATE_CHECKS:
            report = reports.get(name)
            if report is not None and report.verdict == Verdict.PASS:
                report.verdict = Verdict.DEGENERATE
                report.details["note"] = "slack dropped; certified rate is zero"

    def write_outputs(self, result: RunResult) -> Dict[str, Path]:
        """Write <name>.report.json, <name>.series.csv and <name>.meta.json."""
        self.output_directory.mkdir(parents=True, exist_ok=True)
        name = result.scenario.name
        paths = {
            "report": self.output_directory / f"{name}.report.json",
            "series": self.output_directory / f"{name}.series.csv",
            "meta": self.output_directory / f"{name}.meta.json",
        }
        paths["report"].write_text(
            json.dumps(result.to_document(), indent=2, sort_keys=True, allow_nan=False) + "\n",
            encoding="utf-8",
        )
        with open(paths["series"], "w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=SERIES_HEADER, lineterminator="\n")
            writer.writeheader()
            for report in result.reports:
                for point in report.series:
                    writer.writerow({
                        "check": report.check_name,
                        "time": _csv_number(point.time),
                        "value": _csv_number(point.value),
                        "stderr": _csv_number(point.stderr),
                        "seed": "" if point.seed is None else int(point.seed),
                    })
        meta = {
            "elapsed_seconds": result.elapsed,
            "check_seconds": result.check_seconds,
            "finished_at": time.time(),
            "jobs": self.config.jobs,
        }
        paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.logger.info(f"Reports written to {self.output_directory}")
        return paths


def _csv_number(value: float) -> str:
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def load_report(path: Path) -> Dict[str, Any]:
    """Read a report document written by ``write_outputs``."""
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def run_scenario(config_path: Path, config: Optional[RunnerConfig] = None) -> RunResult:
    """Load a scenario document, run it and write its report files."""
    return ScenarioRunner(config).run(load_scenario(Path(config_path)))
