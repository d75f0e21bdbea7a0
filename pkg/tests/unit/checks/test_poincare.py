"""Unit tests for the Poincare inequality under the Gaussian invariant law."""

import numpy as np
import pytest

from hypocert.checks.poincare import (
    PoincareCheck, check_poincare, invariant_gaussian, poincare_test_functions,
)
from hypocert.core.base import Verdict
from hypocert.core.errors import UnsupportedFunctionError
from hypocert.functions.testfn import FunctionFamily, sample_function
from tests.utils.assertion_helpers import assert_report_valid


class TestInvariantGaussian:
    def test_kinetic_invariant_law(self):
        from hypocert.certificates.kfp import quadratic_potential
        mean, cov = invariant_gaussian(quadratic_potential(2.0, 1))

        np.testing.assert_allclose(mean, 0.0)
        np.testing.assert_allclose(cov, np.diag([0.25, 1.0]))

    def test_rejects_non_quadratic(self, perturbed_pot):
        with pytest.raises(UnsupportedFunctionError):
            invariant_gaussian(perturbed_pot)


class TestPoincare:
    """Var(f) <= (a / K) E[T(f)]."""

    def test_certified_constant_passes(self, quadratic_pot, kfp_params, kfp_metric):
        fns = poincare_test_functions(2, 12, seed=0)
        report = check_poincare(quadratic_pot, kfp_metric, kfp_params.gamma_bound(), kfp_params.rho, fns)

        assert_report_valid(report, Verdict.PASS, ["constant", "functions"])
        assert len(report.details["functions"]) == 14
        assert report.details["max_quadrature_discrepancy"] <= 1e-10
        assert {row["method"] for row in report.details["functions"]} == {"exact"}

    def test_overclaimed_rate_fails(self, quadratic_pot, kfp_params, kfp_metric):
        fns = poincare_test_functions(2, 3, seed=0)
        report = check_poincare(quadratic_pot, kfp_metric, kfp_params.gamma_bound(), 100.0, fns)
        assert report.failed

    def test_non_polynomials_use_quadrature(self, quadratic_pot, kfp_params, kfp_metric):
        fns = [sample_function(FunctionFamily("trigonometric"), 2, 1)]
        report = check_poincare(quadratic_pot, kfp_metric, kfp_params.gamma_bound(), kfp_params.rho, fns)

        assert report.details["functions"][0]["method"] == "quadrature"
        assert report.passed

    def test_no_rate_is_degenerate(self, quadratic_pot, kfp_params, kfp_metric):
        report = check_poincare(quadratic_pot, kfp_metric, kfp_params.gamma_bound(), 0.0, [])
        assert report.verdict == Verdict.DEGENERATE

    def test_test_functions_include_hermite_and_linear(self):
        fns = poincare_test_functions(4, 5, seed=1)
        assert len(fns) == 7
        assert fns[-1].value(np.array([0.0, 0.0, 0.0, 2.0])) == pytest.approx(2.0)

    def test_check_wrapper(self, run_context, quadratic_pot, kfp_params, kfp_metric):
        report = PoincareCheck().execute(run_context, potential=quadratic_pot, metric=kfp_metric,
                                         rho=kfp_params.rho, a_gamma=kfp_params.gamma_bound(),
                                         test_functions=4)
        assert report.passed

    def test_check_rejects_non_quadratic(self, run_context, perturbed_pot, kfp_params, kfp_metric):
        report = PoincareCheck().execute(run_context, potential=perturbed_pot, metric=kfp_metric,
                                         rho=kfp_params.rho, a_gamma=1.0)
        assert report.failed
