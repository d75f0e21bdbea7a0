"""Integration tests for the hypocert command line."""

import json

import pytest

from hypocert.certificates.kfp import KFP_CONDITION
from hypocert.cli import EXIT_FAILED, EXIT_OK, EXIT_SCHEMA, main
from tests.utils.assertion_helpers import assert_report_files


@pytest.mark.integration
class TestCertifyKfp:
    """The closed-form certificate from the command line."""

    def test_feasible_prints_parameters(self, capsys):
        code = main(["certify-kfp", "--m", "1", "--M", "2.25"])
        out = capsys.readouterr().out

        assert code == EXIT_OK
        params = json.loads(out[out.index("{"):out.rindex("}") + 1])
        assert params["b"] > params["a"] ** 2
        assert params["rho"] > 0

    def test_rate_profile_over_hessian_window(self, capsys):
        code = main(["certify-kfp", "--m", "1", "--M", "2.25", "--profile", "5"])
        out = capsys.readouterr().out

        assert code == EXIT_OK
        params = json.loads(out[out.index("{"):out.rindex("}") + 1])
        profile = params["rate_profile"]
        assert profile["lam"] == pytest.approx([1.0, 1.3125, 1.625, 1.9375, 2.25])
        assert min(profile["rate"]) >= params["rho"] - 1e-12

    def test_infeasible_names_condition(self, capsys):
        code = main(["certify-kfp", "--m", "1", "--M", "4.1"])
        out = capsys.readouterr().out

        assert code == EXIT_FAILED
        assert "Infeasible" in out
        assert KFP_CONDITION in out

    def test_slack_drop_is_reported(self, capsys):
        code = main(["certify-kfp", "--m", "1", "--M", "3.9"])

        assert code == EXIT_OK
        assert "Slack dropped" in capsys.readouterr().out


@pytest.mark.integration
class TestRunAndReport:
    """Scenario runs and re-reading their outputs."""

    def test_run_config_then_report(self, scenario_file, temp_workspace, capsys):
        out_dir = temp_workspace / "out"
        code = main(["run", "--config", str(scenario_file), "--output-dir", str(out_dir)])

        assert code == EXIT_OK
        assert_report_files(out_dir, "small_ou")
        capsys.readouterr()

        code = main(["report", "--in", str(out_dir / "small_ou.report.json"), "--summary"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "t2" in out
        assert "derivative" in out

    def test_infeasible_builtin_exits_one(self, temp_workspace, capsys):
        code = main(["run", "--builtin", "infeasible_demo", "--output-dir", str(temp_workspace)])
        out = capsys.readouterr().out

        assert code == EXIT_FAILED
        assert "Certificate infeasible" in out
        assert (temp_workspace / "infeasible_demo.report.json").exists()

    def test_schema_error_exits_two(self, temp_workspace, scenario_document, capsys):
        path = temp_workspace / "bad.json"
        path.write_text(scenario_document(checks=["t2", "t2"]), encoding="utf-8")
        code = main(["run", "--config", str(path), "--output-dir", str(temp_workspace)])

        assert code == EXIT_SCHEMA
        assert "Scenario error" in capsys.readouterr().out

    def test_missing_config_exits_two(self, temp_workspace):
        assert main(["run", "--config", str(temp_workspace / "nope.json")]) == EXIT_SCHEMA

    def test_audit_log_is_written(self, scenario_file, temp_workspace):
        audit = temp_workspace / "audit" / "validator.log"
        code = main(["--audit-log", str(audit), "run", "--config", str(scenario_file),
                     "--output-dir", str(temp_workspace / "out")])

        assert code == EXIT_OK
        assert audit.exists()


@pytest.mark.integration
class TestFindSigma:
    """Metric search from a scenario document."""

    def test_writes_certificate(self, temp_workspace, scenario_document, capsys):
        config = temp_workspace / "ou.json"
        config.write_text(scenario_document(
            operator={"kind": "ou", "matrix": [[-1.0, 2.0], [0.0, -1.0]]},
            certificate={"source": "sigma_search", "samples": 1},
            checks=["t2"],
            numerics={"seed": 7},
        ), encoding="utf-8")
        output = temp_workspace / "sigma.json"

        code = main(["find-sigma", "--config", str(config), "--output", str(output)])

        assert code == EXIT_OK
        assert "Certificate written" in capsys.readouterr().out
        certificate = json.loads(output.read_text(encoding="utf-8"))
        assert certificate["rho"] > 0
