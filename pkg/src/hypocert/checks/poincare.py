"""Poincare inequality Var_mu(f) <= (a_gamma / K) E_mu[T(f)] for the Gaussian invariant law."""

import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..certificates.kfp import PotentialSpec
from ..core.base import Check, RunContext, VerificationReport, Verdict
from ..core.errors import UnsupportedFunctionError
from ..core.operator import MetricForm
from ..functions.gaussian import (
    expectation, gauss_hermite_expectation, second_moment, t_expectation, variance,
)
from ..functions.testfn import (
    FunctionFamily, RidgePolynomial, TestFunction, as_ridge, sample_function,
)

logger = logging.getLogger(__name__)

RELATIVE_SLACK = 1e-8
QUADRATURE_TOLERANCE = 1e-10


def invariant_gaussian(pot: PotentialSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of mu ~ exp(-V(x) - |v|^2 / 2) for quadratic V."""
    if not pot.is_quadratic:
        raise UnsupportedFunctionError(f"{pot.name}: invariant measure is only known for quadratic V")
    n = pot.n
    cov = np.zeros((2 * n, 2 * n))
    cov[:n, :n] = np.linalg.inv(pot.quadratic_hessian)
    cov[n:, n:] = np.eye(n)
    return np.zeros(2 * n), cov


def _moments(f: TestFunction, S: MetricForm, mean: np.ndarray, cov: np.ndarray,
             order: Optional[int]) -> Dict[str, Any]:
    """Var and E[T(f)], exactly for polynomials and by quadrature otherwise."""
    def quad(func: Any) -> float:
        return gauss_hermite_expectation(func, mean, cov, order)

    q_mean = quad(f.value)
    q_second = quad(lambda z: f.value(z) ** 2)
    q_t = quad(lambda z: np.einsum("...i,ij,...j->...", f.grad(z), S.matrix, f.grad(z)))
    q_var = max(q_second - q_mean ** 2, 0.0)

    try:
        ridge = as_ridge(f)
    except UnsupportedFunctionError:
        return {"variance": q_var, "t_integral": q_t, "method": "quadrature", "discrepancy": 0.0}

    e_mean = expectation(ridge, mean, cov)
    e_second = second_moment(ridge, mean, cov)
    e_t = t_expectation(ridge, S.matrix, mean, cov)
    discrepancy = max(
        abs(e_mean - q_mean) / (1.0 + abs(e_mean)),
        abs(e_second - q_second) / (1.0 + abs(e_second)),
        abs(e_t - q_t) / (1.0 + abs(e_t)),
    )
    return {"variance": variance(ridge, mean, cov), "t_integral": e_t, "method": "exact",
            "discrepancy": discrepancy}


def check_poincare(pot: PotentialSpec, S: MetricForm, a_gamma: float, K: float,
                   test_fns: Sequence[TestFunction], quadrature_order: Optional[int] = None
                   ) -> VerificationReport:
    """Var_mu(f) <= (a_gamma / K) E_mu[T(f)] (1 + 1e-8) for every test function.

    ``K`` is the positive rate of the certificate.
    """
    mean, cov = invariant_gaussian(pot)
    if K <= 0.0:
        return VerificationReport(
            check_name="poincare", verdict=Verdict.DEGENERATE, margin=float("-inf"),
            provenance={"K": K, "a_gamma": a_gamma},
            details={"reason": "no positive rate; the Poincare constant a/K is infinite"},
        )
    constant = a_gamma / K
    worst = np.inf
    worst_quad = 0.0
    rows: List[Dict[str, Any]] = []
    for i, f in enumerate(test_fns):
        m = _moments(f, S, mean, cov, quadrature_order)
        bound = constant * m["t_integral"] * (1.0 + RELATIVE_SLACK)
        margin = (bound - m["variance"]) / max(1.0, bound)
        worst = min(worst, margin)
        worst_quad = max(worst_quad, m["discrepancy"])
        rows.append({"index": i, "function": f.describe(), "margin": margin, **m})

    if not rows:
        worst = 0.0
    report = VerificationReport.from_margin(
        "poincare", worst, 0.0,
        provenance={"K": K, "a_gamma": a_gamma, "quadrature_order": quadrature_order,
                    "tolerance_relative": RELATIVE_SLACK},
        details={"constant": constant, "functions": rows, "max_quadrature_discrepancy": worst_quad},
    )
    if worst_quad > QUADRATURE_TOLERANCE:
        report.verdict = Verdict.FAIL
        report.details["reason"] = "exact Gaussian moments disagree with quadrature"
        logger.warning(f"Poincare moment cross-check failed: discrepancy {worst_quad:.3e}")
    return report


def poincare_test_functions(dim: int, count: int, seed: int) -> List[TestFunction]:
    """Random polynomials of degree <= 4 plus the Hermite polynomial x^2 - 1 and a function linear in v."""
    rng = np.random.default_rng(seed)
    kinds = ("linear", "quadratic", "polynomial")
    fns: List[TestFunction] = [
        sample_function(FunctionFamily(kinds[i % 3]), dim, int(s))
        for i, s in enumerate(rng.integers(0, 2 ** 32, size=count))
    ]
    e0 = np.eye(dim)[0]
    fns.append(RidgePolynomial.from_quadratic(2.0 * np.outer(e0, e0), constant=-1.0))
    fns.append(RidgePolynomial.linear(np.eye(dim)[-1]))
    return fns


class PoincareCheck(Check):
    """Poincare inequality under the exact Gaussian invariant measure."""

    def __init__(self) -> None:
        super().__init__(
            name="poincare",
            description="Verify Var_mu(f) <= (a/K) E_mu[T(f)] with exact Gaussian moments"
        )

    def validate_input(self, **kwargs: Any) -> bool:
        pot = kwargs.get("potential")
        return pot is not None and pot.is_quadratic and kwargs.get("metric") is not None \
            and kwargs.get("rho") is not None and kwargs.get("a_gamma") is not None

    def execute(self, context: RunContext, **kwargs: Any) -> VerificationReport:
        if not self.validate_input(**kwargs):
            return self._invalid_input(**kwargs)
        pot: PotentialSpec = kwargs["potential"]
        fns = poincare_test_functions(2 * pot.n, int(kwargs.get("test_functions", 20)),
                                      int(kwargs.get("seed", 0)))
        return check_poincare(pot, kwargs["metric"], float(kwargs["a_gamma"]), float(kwargs["rho"]), fns)

    def _get_parameter_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "potential": {"type": "object", "description": "Quadratic PotentialSpec"},
                "metric": {"type": "object"},
                "rho": {"type": "number", "description": "Certified rate K > 0"},
                "a_gamma": {"type": "number", "description": "Smallest a with Gamma <= a T"},
                "test_functions": {"type": "integer", "default": 20},
                "seed": {"type": "integer"},
            },
            "required": ["potential", "metric", "rho", "a_gamma"],
        }
