"""Wasserstein contraction W2(P_t* mu, P_t* nu) <= C e^{Kt} W2(mu, nu) on particle ensembles."""

import logging
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from ..core.base import Check, RunContext, SeriesPoint, VerificationReport, Verdict
from ..core.operator import MetricForm
from ..dynamics.sde import DEFAULT_DT, Ensemble, SdeSystem, evolve_ensemble, evolve_snapshots
from ..transport.wasserstein import median_cost, optimal_assignment, w2_entropic, w2_exact

logger = logging.getLogger(__name__)

SYNCHRONOUS = "synchronous"
INDEPENDENT = "independent"
EXACT = "exact"
ENTROPIC = "entropic"
# entropic regularization as a fraction of the median squared distance
ENTROPIC_SCALE = 1e-2
NOISE_LIMIT = 0.2
RATIO_TOLERANCE = 1e-9


def _w2_solver(solver: str) -> Callable[[Ensemble, Ensemble, MetricForm], float]:
    if solver == EXACT:
        return w2_exact

    def entropic(X: Ensemble, Y: Ensemble, D: MetricForm) -> float:
        return w2_entropic(X, Y, D, eps=ENTROPIC_SCALE * max(median_cost(X, Y, D), 1e-12))
    return entropic


def check_wasserstein_contraction(sys: SdeSystem, S: MetricForm, K: float, mu0: Ensemble, nu0: Ensemble,
                                  times: Sequence[float], seed: int, dt: float = DEFAULT_DT,
                                  replicates: int = 10, mode: str = SYNCHRONOUS, jobs: int = 1,
                                  prefactor: float = 1.0, distance: Optional[MetricForm] = None,
                                  check_name: str = "wasserstein", solver: str = EXACT
                                  ) -> VerificationReport:
    """ratio(t) = W2(P_t* mu, P_t* nu) / (prefactor e^{Kt} W2(mu, nu)) must stay below 1 + 3 SE.

    ``distance`` defaults to S; with the identity metric and ``prefactor`` = C1
    this is the Euclidean form of the contraction.
    ``solver`` = "entropic" replaces the assignment by Sinkhorn at eps =
    ENTROPIC_SCALE times the median squared distance of each pair of clouds.
    """
    D = distance if distance is not None else S
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])):
        return VerificationReport.from_error(check_name, "times must be strictly increasing")
    if mode not in (SYNCHRONOUS, INDEPENDENT):
        return VerificationReport.from_error(check_name, f"unknown coupling mode '{mode}'")
    if solver not in (EXACT, ENTROPIC):
        return VerificationReport.from_error(check_name, f"unknown transport solver '{solver}'")

    provenance = {"seed": seed, "N": mu0.size, "dt": dt, "K": K, "replicates": replicates,
                  "mode": mode, "solver": solver, "prefactor": prefactor, "metric": D.to_dict()}
    w2 = _w2_solver(solver)
    w0 = w2(mu0, nu0, D)
    if w0 <= 1e-12:
        return VerificationReport(
            check_name=check_name, verdict=Verdict.PASS, margin=0.0, tolerance=RATIO_TOLERANCE,
            series=[SeriesPoint(t, 0.0, 0.0, seed) for t in times], provenance=provenance,
            details={"w0": w0, "note": "identical initial measures"},
        )

    nu_start = nu0
    if mode == SYNCHRONOUS:
        perm, _ = optimal_assignment(mu0, nu0, D)
        nu_start = Ensemble(nu0.particles[perm], nu0.provenance)
    nu_stream = 0 if mode == SYNCHRONOUS else 1

    ratios = np.empty((replicates, len(times)))
    for r in range(replicates):
        mu_t = evolve_snapshots(sys, mu0, times, dt, seed + r, jobs, stream=0)
        nu_t = evolve_snapshots(sys, nu_start, times, dt, seed + r, jobs, stream=nu_stream)
        for j, t in enumerate(times):
            ratios[r, j] = w2(mu_t[j], nu_t[j], D) / (prefactor * np.exp(K * t) * w0)
        logger.debug(f"{check_name} replicate {r}: ratios {ratios[r].round(6).tolist()}")

    mean = ratios.mean(axis=0)
    se = ratios.std(axis=0, ddof=1) / np.sqrt(replicates) if replicates > 1 else np.zeros(len(times))
    slack = 1.0 + 3.0 * se + RATIO_TOLERANCE - mean
    margin = float(slack.min())

    verdict = Verdict.PASS
    reason = None
    if margin < 0:
        bad = int(np.argmin(slack))
        if 3.0 * se[bad] > NOISE_LIMIT:
            verdict, reason = Verdict.INCONCLUSIVE, "replicate spread exceeds 20% of the bound"
            logger.warning(f"{check_name} inconclusive at t={times[bad]}: 3 SE = {3 * se[bad]:.3f}")
        else:
            verdict, reason = Verdict.FAIL, f"contraction ratio {mean[bad]:.6f} at t={times[bad]}"

    details: Dict[str, Any] = {"w0": w0, "mean_ratio": mean.tolist(), "stderr": se.tolist()}
    if reason:
        details["reason"] = reason
    return VerificationReport(
        check_name=check_name, verdict=verdict, margin=margin, tolerance=RATIO_TOLERANCE,
        series=[SeriesPoint(t, float(m), float(s), seed) for t, m, s in zip(times, mean, se)],
        provenance=provenance, details=details,
    )


def check_invariant_convergence(sys: SdeSystem, S: MetricForm, rho: float, nu0: Ensemble,
                                times: Sequence[float], seed: int, burn_in: float,
                                dt: float = DEFAULT_DT, jobs: int = 1) -> VerificationReport:
    """W2(P_t* nu, mu_emp) against e^{-rho t}(W2(nu, mu_emp) + floor) + 2 floor.

    mu_emp is ``nu0`` pushed forward for ``burn_in`` on a separate stream; the
    floor is the distance between two such independent burn-ins.
    """
    reference = evolve_ensemble(sys, nu0, burn_in, dt, seed, jobs, stream=1)
    replica = evolve_ensemble(sys, nu0, burn_in, dt, seed, jobs, stream=2)
    floor = w2_exact(reference, replica, S)
    w_start = w2_exact(nu0, reference, S)

    snapshots = evolve_snapshots(sys, nu0, times, dt, seed, jobs, stream=0)
    series: List[SeriesPoint] = []
    slack = []
    for t, snap in zip(times, snapshots):
        w_t = w2_exact(snap, reference, S)
        bound = np.exp(-rho * t) * (w_start + floor) + 2.0 * floor
        slack.append((bound - w_t) / max(bound, 1e-12))
        series.append(SeriesPoint(float(t), w_t, floor, seed))

    margin = float(min(slack)) if slack else 0.0
    return VerificationReport.from_margin(
        "invariant", margin, RATIO_TOLERANCE, series=series,
        provenance={"seed": seed, "N": nu0.size, "dt": dt, "burn_in": burn_in, "rho": rho},
        details={"sampling_floor": floor, "w_start": w_start,
                 "note": "empirical invariant law from a long run, not the exact measure"},
    )


def _initial_ensembles(dim: int, N: int, seed: int) -> Dict[str, Ensemble]:
    mu0 = Ensemble.from_gaussian(np.zeros(dim), np.eye(dim), N, seed, stream=10)
    shift = np.full(dim, 1.0)
    nu0 = Ensemble.from_gaussian(shift, 0.5 * np.eye(dim), N, seed, stream=11)
    return {"mu0": mu0, "nu0": nu0}


class WassersteinCheck(Check):
    """Contraction of two particle ensembles, in the metric of the certificate and Euclidean."""

    def __init__(self) -> None:
        super().__init__(
            name="wasserstein",
            description="Evolve two ensembles and compare W2 with e^{Kt} W2 at time 0"
        )

    def validate_input(self, **kwargs: Any) -> bool:
        return all(kwargs.get(k) is not None for k in ("system", "metric", "rho")) \
            and int(kwargs.get("N", 2)) >= 1 and len(kwargs.get("times", [1.0])) >= 1

    def execute(self, context: RunContext, **kwargs: Any) -> VerificationReport:
        if not self.validate_input(**kwargs):
            return self._invalid_input(**kwargs)
        sys: SdeSystem = kwargs["system"]
        S: MetricForm = kwargs["metric"]
        K = -float(kwargs["rho"])
        seed = int(kwargs.get("seed", 0))
        clouds = _initial_ensembles(sys.dim, int(kwargs.get("N", 500)), seed)
        common = dict(
            times=kwargs.get("times", [0.5, 1.0, 2.0, 5.0]), seed=seed,
            dt=float(kwargs.get("dt", DEFAULT_DT)), replicates=int(kwargs.get("replicates", 10)),
            jobs=context.jobs, mode=str(kwargs.get("coupling", SYNCHRONOUS)),
            solver=str(kwargs.get("transport", EXACT)),
        )
        report = check_wasserstein_contraction(sys, S, K, clouds["mu0"], clouds["nu0"], **common)
        prefactor = kwargs.get("prefactor")
        if prefactor is not None:
            euclid = check_wasserstein_contraction(
                sys, S, K, clouds["mu0"], clouds["nu0"], prefactor=float(prefactor),
                distance=MetricForm.identity(sys.dim), check_name="wasserstein_euclidean", **common,
            )
            report.details["euclidean"] = euclid.to_dict()
            if euclid.failed and not report.failed:
                report.verdict = Verdict.FAIL
                report.details["reason"] = "Euclidean contraction with prefactor C1 failed"
        return report

    def _get_parameter_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "system": {"type": "object"},
                "metric": {"type": "object"},
                "rho": {"type": "number"},
                "N": {"type": "integer", "default": 500},
                "times": {"type": "array", "items": {"type": "number"}},
                "replicates": {"type": "integer", "default": 10},
                "prefactor": {"type": "number", "description": "C1 for the Euclidean variant"},
                "coupling": {"type": "string", "enum": [SYNCHRONOUS, INDEPENDENT],
                             "default": SYNCHRONOUS},
                "transport": {"type": "string", "enum": [EXACT, ENTROPIC], "default": EXACT},
                "seed": {"type": "integer"},
                "dt": {"type": "number"},
            },
            "required": ["system", "metric", "rho"],
        }


class InvariantConvergenceCheck(Check):
    """Convergence of P_t* nu toward an empirical invariant law."""

    def __init__(self) -> None:
        super().__init__(
            name="invariant",
            description="Compare W2(P_t* nu, mu) with the certified exponential decay"
        )

    def validate_input(self, **kwargs: Any) -> bool:
        return all(kwargs.get(k) is not None for k in ("system", "metric", "rho")) \
            and float(kwargs.get("burn_in", 1.0)) > 0

    def execute(self, context: RunContext, **kwargs: Any) -> VerificationReport:
        if not self.validate_input(**kwargs):
            return self._invalid_input(**kwargs)
        sys: SdeSystem = kwargs["system"]
        seed = int(kwargs.get("seed", 0))
        nu0 = _initial_ensembles(sys.dim, int(kwargs.get("N", 500)), seed)["nu0"]
        return check_invariant_convergence(
            sys, kwargs["metric"], float(kwargs["rho"]), nu0,
            times=kwargs.get("times", [0.5, 1.0, 2.0, 5.0]), seed=seed,
            burn_in=float(kwargs.get("burn_in", 10.0)), dt=float(kwargs.get("dt", DEFAULT_DT)),
            jobs=context.jobs,
        )

    def _get_parameter_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "system": {"type": "object"},
                "metric": {"type": "object"},
                "rho": {"type": "number"},
                "burn_in": {"type": "number", "default": 10.0},
                "N": {"type": "integer", "default": 500},
                "times": {"type": "array", "items": {"type": "number"}},
                "seed": {"type": "integer"},
                "dt": {"type": "number"},
            },
            "required": ["system", "metric", "rho"],
        }
