"""Unit tests for the sampled T2 inequality."""

import numpy as np
import pytest

from hypocert.certificates.kfp import build_operator, cosine_perturbed_potential, solve_kfp_params
from hypocert.checks.t2 import T2Check, check_t2_inequality
from hypocert.core.base import Verdict
from hypocert.core.operator import MetricForm, t2_form
from hypocert.functions.testfn import FunctionFamily
from tests.utils.assertion_helpers import assert_report_valid


class TestT2Inequality:
    """T2(f) - rho T(f) >= 0 over random functions and points."""

    def test_certified_rate_passes(self, kfp_op, kfp_params, kfp_metric):
        report = check_t2_inequality(kfp_op, kfp_metric, kfp_params.rho, trials=100, seed=0)

        assert_report_valid(report, Verdict.PASS, ["witness", "max_fd_error", "margin_by_family"])
        assert set(report.details["margin_by_family"]) == {
            "linear", "quadratic", "polynomial", "trigonometric", "gaussian_bump"}

    def test_perturbed_potential_passes(self):
        """The certificate for m = 0.9, M = 1.1 holds pointwise for the cosine potential."""
        pot = cosine_perturbed_potential(1.0, 0.1)
        params = solve_kfp_params(*pot.hessian_bounds)
        report = check_t2_inequality(build_operator(pot), params.sde_metric(), params.rho,
                                     trials=100, seed=3)
        assert_report_valid(report, Verdict.PASS)

    def test_overclaimed_rate_fails_with_witness(self, ou_op):
        report = check_t2_inequality(ou_op, MetricForm.identity(2), 1.0, trials=50, seed=1,
                                     families=[FunctionFamily("linear")])

        assert_report_valid(report, Verdict.FAIL)
        assert report.margin < 0.0
        assert report.details["witness"]["family"] == "linear"
        assert len(report.details["witness"]["point"]) == 2

    def test_oracle_error_is_relative_to_t2_only(self, mocker, ou_op):
        """A mismatch of 1.5e-4 (1 + |T2|) fails however large T(f) is."""
        def shifted(op, S, f, x):
            t2 = t2_form(op, S, f, x)
            return t2 + 1.5e-4 * (1.0 + abs(t2))

        mocker.patch("hypocert.checks.t2.t2_finite_difference", side_effect=shifted)
        report = check_t2_inequality(ou_op, MetricForm.identity(2), -1.0, trials=10, seed=0,
                                     families=[FunctionFamily("linear")])

        assert_report_valid(report, Verdict.FAIL)
        assert report.details["max_fd_error"] == pytest.approx(1.5e-4)
        assert "finite-difference" in report.details["reason"]

    def test_deterministic(self, kfp_op, kfp_metric):
        a = check_t2_inequality(kfp_op, kfp_metric, 0.0, trials=20, seed=5)
        b = check_t2_inequality(kfp_op, kfp_metric, 0.0, trials=20, seed=5)
        assert a.to_dict() == b.to_dict()

    def test_no_trials(self, kfp_op, kfp_metric):
        report = check_t2_inequality(kfp_op, kfp_metric, 0.0, trials=0, seed=0)
        assert report.failed
        assert "trials" in report.error


class TestT2Check:
    """Check wrapper."""

    def test_execute(self, run_context, ou_op):
        report = T2Check().execute(run_context, operator=ou_op, metric=MetricForm.identity(2),
                                   rho=-1.0, trials=30, seed=2)
        assert report.passed

    def test_missing_rate(self, run_context, ou_op):
        report = T2Check().execute(run_context, operator=ou_op, metric=MetricForm.identity(2))
        assert report.failed
        assert "rho" in report.error

    def test_tolerances_override(self, run_context, ou_op):
        report = T2Check().execute(run_context, operator=ou_op, metric=MetricForm.identity(2),
                                   rho=0.0, trials=10, tolerances={"t2": 1e-3})
        assert report.tolerance == pytest.approx(1e-3)

    def test_schema_lists_parameters_only(self):
        schema = T2Check().get_schema()

        assert set(schema) == {"name", "description", "parameters"}
        assert schema["parameters"]["required"] == ["operator", "metric", "rho"]
        assert "tolerances" in schema["parameters"]["properties"]
