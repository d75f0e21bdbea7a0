"""Unit tests for the gradient bound and its short-time expansion."""

import numpy as np
import pytest

from hypocert.certificates.kfp import build_operator
from hypocert.checks.gradient import (
    GradientBoundCheck, ShortTimeDerivativeCheck, check_gradient_bound,
    check_short_time_derivative, sample_paths,
)
from hypocert.core.base import Verdict
from hypocert.core.errors import UnsupportedFunctionError
from hypocert.core.operator import DiffusionOperator, MetricForm
from hypocert.dynamics.sde import SdeSystem
from hypocert.functions.testfn import FunctionFamily, RidgePolynomial, sample_function
from tests.utils.assertion_helpers import assert_report_valid


@pytest.fixture
def diagonal_ou():
    """dZ = -diag(1, 2) Z dt + sqrt(2) dB, rate 1 in the identity metric."""
    return SdeSystem.from_operator(DiffusionOperator.linear(np.diag([-1.0, -2.0]), np.eye(2)))


class TestGradientBound:
    """T(P_t f) <= e^{2Kt} P_t T(f)."""

    def test_certified_kinetic_rate_passes(self, kfp_system, kfp_params, kfp_metric):
        f = sample_function(FunctionFamily("polynomial"), 2, 4)
        report = check_gradient_bound(kfp_system, kfp_metric, -kfp_params.rho, f,
                                      [[0.5, -0.3], [0.0, 1.0]], t=0.5, N=2000, seed=1)

        assert_report_valid(report, Verdict.PASS)
        for part in report.details["parts"]:
            assert part["exact_margin"] >= -1e-10

    def test_overclaimed_rate_fails(self, diagonal_ou):
        """A linear f has no Monte Carlo error, so an overclaim is a clean failure."""
        f = RidgePolynomial.linear([1.0, 1.0])
        report = check_gradient_bound(diagonal_ou, MetricForm.identity(2), -3.0, f, [[0.2, 0.1]],
                                      t=1.0, N=100, seed=0)

        assert report.verdict == Verdict.FAIL
        assert report.details["parts"][0]["reason"] == "exact propagation violates the bound"

    def test_zero_time_is_equality(self, diagonal_ou):
        report = check_gradient_bound(diagonal_ou, MetricForm.identity(2), -1.0,
                                      RidgePolynomial.linear([1.0, 0.0]), [[0.0, 0.0]], t=0.0,
                                      N=10, seed=0)
        assert report.passed
        assert report.margin == 0.0

    def test_nonlinear_paths_share_noise(self, perturbed_pot):
        sys = SdeSystem.from_operator(build_operator(perturbed_pot))
        samples = sample_paths(sys, np.array([0.3, 0.1]), [0.02, 0.05], N=5, seed=2, dt=0.01)

        assert [s.time for s in samples] == [0.02, 0.05]
        assert samples[0].center.shape == (5, 2)
        assert samples[0].perturbed.shape == (4, 5, 2)
        assert samples[0].flow is None
        # identical noise: the perturbed endpoints stay within O(h) of the center
        assert np.abs(samples[1].perturbed[0] - samples[1].center).max() < 1e-2

    def test_check_wrapper(self, run_context, diagonal_ou):
        report = GradientBoundCheck().execute(
            run_context, system=diagonal_ou, metric=MetricForm.identity(2), rho=1.0, N=200,
            times=[0.5], points=1, test_functions=3, seed=4,
        )
        assert report.passed
        assert len(report.details["parts"]) == 3

    def test_check_requires_samples(self, run_context, diagonal_ou):
        report = GradientBoundCheck().execute(run_context, system=diagonal_ou,
                                              metric=MetricForm.identity(2), rho=1.0, N=1)
        assert report.failed


class TestShortTimeDerivative:
    """(e^{2Kt} P_t T(f) - T(P_t f)) / t -> 2 (T2(f) + K T(f))."""

    def test_certified_rate(self, diagonal_ou):
        for seed in range(5):
            f = sample_function(FunctionFamily("polynomial"), 2, seed)
            report = check_short_time_derivative(diagonal_ou, MetricForm.identity(2), -1.0, f,
                                                 [0.3, -0.2])
            assert_report_valid(report, Verdict.PASS, ["limit", "slopes"])
            assert report.details["slope_error"] <= 0.1 * (1.0 + abs(report.details["limit"]))

    def test_overclaimed_rate(self, diagonal_ou):
        f = RidgePolynomial.linear([1.0, 1.0])
        report = check_short_time_derivative(diagonal_ou, MetricForm.identity(2), -3.0, f, [0.0, 0.0])

        assert report.failed
        assert report.details["limit"] < 0.0

    def test_requires_linear_drift(self, perturbed_pot):
        sys = SdeSystem.from_operator(build_operator(perturbed_pot))
        with pytest.raises(UnsupportedFunctionError):
            check_short_time_derivative(sys, MetricForm.identity(2), 0.0,
                                        RidgePolynomial.linear([1.0, 0.0]), [0.0, 0.0])

    def test_check_wrapper(self, run_context, kfp_system, kfp_params, kfp_metric):
        report = ShortTimeDerivativeCheck().execute(
            run_context, system=kfp_system, metric=kfp_metric, rho=kfp_params.rho,
            points=2, test_functions=4, seed=0,
        )
        assert report.passed
        assert len(report.details["parts"]) == 8
