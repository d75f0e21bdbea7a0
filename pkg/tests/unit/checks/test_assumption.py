"""Unit tests for the standing-assumption check."""

import dataclasses

from hypocert.certificates.kfp import build_operator
from hypocert.checks.assumption import AssumptionCheck, check_standing_assumptions
from hypocert.core.base import Verdict
from hypocert.core.operator import MetricForm
from tests.utils.assertion_helpers import assert_report_valid


class TestStandingAssumptions:
    """Lyapunov function plus Hessian bounds."""

    def test_kinetic_operator_passes(self, perturbed_pot, kfp_metric):
        op = build_operator(perturbed_pot)
        report = check_standing_assumptions(op, kfp_metric, n_points=2000, potential=perturbed_pot)

        assert_report_valid(report, Verdict.PASS, ["c_hat", "compact_sublevels", "hessian_bound_violation"])
        assert report.details["compact_sublevels"] is True
        assert report.provenance["radius"] == 20.0

    def test_declared_bounds_too_tight(self, perturbed_pot, kfp_metric):
        tight = dataclasses.replace(perturbed_pot, hessian_bounds=(0.95, 1.05))
        report = check_standing_assumptions(build_operator(perturbed_pot), kfp_metric, n_points=500,
                                            potential=tight)

        assert report.failed
        assert report.details["hessian_bound_violation"] > 0.04

    def test_check_with_custom_candidate(self, run_context, kfp_op, kfp_metric):
        report = AssumptionCheck().execute(
            run_context, operator=kfp_op, metric=kfp_metric, sample_points=500,
            lyapunov={"matrix": [[1.0, 0.0], [0.0, 1.0]], "constant": 0.5},
        )
        assert report.failed
        assert report.details["reason"] == "U < 1"

    def test_check_default_candidate(self, run_context, ou_op):
        """U = 1 + |z|^2 on a non-normal OU process: C is at most 4."""
        report = AssumptionCheck().execute(run_context, operator=ou_op, metric=MetricForm.identity(2),
                                           sample_points=1000)

        assert report.passed
        assert report.details["c_hat"] <= 4.0 + 1e-12
