"""End-to-end runs of the built-in scenarios at reduced size."""

import copy
import json

import pytest

from hypocert.core.base import Verdict
from hypocert.core.runner import ScenarioRunner, load_report
from hypocert.scenario.config import parse_scenario
from hypocert.scenario.registry import BUILTIN_SCENARIOS
from tests.utils.assertion_helpers import assert_report_files, assert_report_valid


def reduced(name, checks=None, **numerics):
    """A built-in scenario with smaller numerics, parsed the same way as a file."""
    document = copy.deepcopy(BUILTIN_SCENARIOS[name])
    document["numerics"].update(numerics)
    if checks is not None:
        document["checks"] = checks
    return parse_scenario(json.dumps(document), source=f"<reduced:{name}>")


@pytest.fixture
def runner(runner_config):
    return ScenarioRunner(runner_config)


@pytest.mark.integration
class TestClosedFormScenario:
    """Quadratic kinetic Fokker-Planck with the closed-form metric."""

    def test_exact_checks_pass(self, runner):
        scenario = reduced("kfp_quadratic_demo",
                           checks=["assumption", "t2", "derivative", "poincare", "h1"],
                           sample_points=2000, test_functions=5)
        result = runner.run(scenario)

        assert result.exit_code == 0, result.failed_checks
        assert result.certificate["source"] == "closed_form"
        assert result.certificate["prefactor"] > 0
        for report in result.reports:
            assert_report_valid(report, expected_verdict=Verdict.PASS)

    @pytest.mark.slow
    @pytest.mark.monte_carlo
    def test_all_checks_agree(self, runner):
        """Every statement, the sampled ones included, passes and the equivalence holds."""
        scenario = reduced("kfp_quadratic_demo", N=100, dt=0.01, times=[0.5, 1.0, 2.0],
                           t_end=2.0, replicates=3, burn_in=4.0, trials=100,
                           test_functions=5, sample_points=2000)
        result = runner.run(scenario)

        assert result.exit_code == 0, result.failed_checks
        equivalence = result.report("equivalence")
        assert equivalence is not None
        assert_report_valid(equivalence, expected_verdict=Verdict.PASS)
        assert equivalence.details["conflicts"] == []
        euclidean = result.report("wasserstein").details["euclidean"]
        assert euclidean["check_name"] == "wasserstein_euclidean"

        out = result.paths["report"].parent
        assert_report_files(out, "kfp_quadratic_demo")
        document = load_report(result.paths["report"])
        assert document["summary"]["exit_code"] == 0

    @pytest.mark.monte_carlo
    def test_independent_coupling_through_scenario(self, runner):
        """The audit mode with independent noise is selected from the numerics section."""
        scenario = reduced("kfp_quadratic_demo", checks=["wasserstein"], N=100, dt=0.01,
                           times=[1.0, 2.0], t_end=2.0, replicates=3, coupling="independent")
        result = runner.run(scenario)
        report = result.report("wasserstein")

        assert report.error is None
        assert report.provenance["mode"] == "independent"
        assert report.details["euclidean"]["provenance"]["mode"] == "independent"
        assert report.verdict in (Verdict.PASS, Verdict.INCONCLUSIVE)


@pytest.mark.integration
class TestSearchedMetricScenario:
    """Non-normal OU certified by the metric search."""

    def test_exact_checks_pass(self, runner):
        scenario = reduced("ou_demo", checks=["assumption", "t2", "derivative"],
                           sample_points=2000, test_functions=5)
        result = runner.run(scenario)

        assert result.exit_code == 0, result.failed_checks
        assert result.certificate["source"] == "sigma_search"
        assert result.certificate["rho"] > 0
        names = [report.check_name for report in result.reports]
        assert names == sorted(names)
        assert "equivalence" in names

    def test_rerun_reproduces_reports(self, runner_config):
        scenario = reduced("ou_demo", checks=["t2", "derivative"], test_functions=3)
        first = ScenarioRunner(runner_config).run(scenario)
        text = first.paths["report"].read_text(encoding="utf-8")
        second = ScenarioRunner(runner_config).run(scenario)

        assert second.paths["report"].read_text(encoding="utf-8") == text


@pytest.mark.integration
class TestNonContractiveScenarios:
    """Scenarios whose certificate cannot hold."""

    def test_infeasible_closed_form(self, runner):
        result = runner.run(reduced("infeasible_demo"))

        assert result.exit_code == 1
        assert result.certificate["feasible"] is False
        assert result.reports == []

    def test_kolmogorov_has_no_positive_rate(self, runner):
        """The unconfined operator only admits a non-positive rate with the identity metric."""
        result = runner.run(reduced("kolmogorov_demo", checks=["t2", "derivative"], test_functions=3))

        assert result.certificate["rho"] <= 0
        assert result.report("t2") is not None
