"""Command-line interface for hypocert."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .certificates.kfp import rate_profile, solve_kfp_params
from .core.base import to_jsonable
from .core.errors import HypocertError, InfeasibleCertificateError, ScenarioError
from .core.runner import RunnerConfig, ScenarioRunner, load_report
from .scenario.config import Scenario, load_scenario
from .scenario.registry import build_from_spec, builtin_names, builtin_scenario
from .scenario.validator import ValidatorConfig

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_SCHEMA = 2

VERDICT_ICONS = {"pass": "✅", "fail": "❌", "degenerate": "⚠️ ", "inconclusive": "❔"}


def create_parser() -> argparse.ArgumentParser:
    """Create the command-line argument parser."""
    parser = argparse.ArgumentParser(
        prog="hypocert",
        description="Construct and numerically verify hypocoercive contraction certificates",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  hypocert certify-kfp --m 1 --M 2.25 --slack 0.05
  hypocert run --builtin kfp_quadratic_demo --jobs 4
  hypocert run --config scenario.json --output-dir results
  hypocert find-sigma --config scenario.json
  hypocert report --in results/kfp_quadratic_demo.report.json --summary
        """
    )

    parser.add_argument(
        "--version",
        action="version",
        version="%(prog)s 0.1.0"
    )

    parser.add_argument(
        "--verbose", "-v",
        action="store_true",
        help="Enable verbose logging"
    )

    parser.add_argument(
        "--audit-log",
        type=str,
        help="Append scenario validation records to this file"
    )

    commands = parser.add_subparsers(dest="command", required=True)

    certify = commands.add_parser("certify-kfp", help="Closed-form certificate for Hessian bounds")
    certify.add_argument("--m", type=float, required=True, help="Lower Hessian bound of V")
    certify.add_argument("--M", type=float, required=True, help="Upper Hessian bound of V")
    certify.add_argument("--slack", type=float, default=0.05, help="Relative widening (default: 0.05)")
    certify.add_argument("--n", type=int, default=1, help="Position dimension (default: 1)")
    certify.add_argument("--profile", type=int, default=0,
                         help="Also print the rate at this many Hessian eigenvalues in [m, M]")

    find = commands.add_parser("find-sigma", help="Search a constant metric for a scenario's operator")
    find.add_argument("--config", type=str, required=True, help="Scenario document (JSON)")
    find.add_argument("--output", type=str, help="Write the certificate JSON here")

    run = commands.add_parser("run", help="Run a scenario and write report files")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=str, help="Scenario document (JSON)")
    source.add_argument("--builtin", type=str, choices=builtin_names(), help="Built-in scenario")
    run.add_argument("--jobs", "-j", type=int, default=1, help="Worker threads (default: 1)")
    run.add_argument("--output-dir", "-o", type=str, default="hypocert-out",
                     help="Directory for report files (default: ./hypocert-out)")

    report = commands.add_parser("report", help="Inspect a report written by 'run'")
    report.add_argument("--in", dest="input", type=str, required=True, help="Report JSON")
    report.add_argument("--summary", action="store_true", help="Print a per-check verdict table")

    return parser


def _load(args: argparse.Namespace) -> Scenario:
    if getattr(args, "builtin", None):
        return builtin_scenario(args.builtin)
    return load_scenario(Path(args.config))


def _runner(args: argparse.Namespace, **overrides: Any) -> ScenarioRunner:
    config = RunnerConfig(
        verbose_logging=args.verbose,
        validator_config=ValidatorConfig(audit_log=args.audit_log),
        **overrides,
    )
    return ScenarioRunner(config)


def certify_kfp(args: argparse.Namespace) -> int:
    try:
        params = solve_kfp_params(args.m, args.M, args.slack, n=args.n)
    except InfeasibleCertificateError as exc:
        print(f"❌ Infeasible: {exc}")
        print(f"   Condition: {exc.condition}")
        return EXIT_FAILED
    output = params.to_dict()
    if args.profile > 0:
        lams = np.linspace(args.m, args.M, args.profile)
        output["rate_profile"] = {"lam": lams, "rate": rate_profile(params, lams)}
    print(json.dumps(to_jsonable(output), indent=2, sort_keys=True))
    if params.slack_dropped:
        print("⚠️  Slack dropped: the certified rate is zero")
    return EXIT_OK


def find_sigma_command(args: argparse.Namespace) -> int:
    scenario = load_scenario(Path(args.config))
    runner = _runner(args, write_outputs=False)
    op, pot = build_from_spec(scenario.operator)
    if scenario.certificate.source != "sigma_search":
        scenario.certificate.source = "sigma_search"
    try:
        cert = runner.build_certificate(scenario, op, pot)
    except InfeasibleCertificateError as exc:
        print(f"❌ Infeasible: {exc}")
        return EXIT_FAILED
    text = json.dumps(to_jsonable(cert.to_dict()), indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
        print(f"💾 Certificate written to {args.output}")
    else:
        print(text)
    return EXIT_OK


def run_command(args: argparse.Namespace) -> int:
    scenario = _load(args)
    runner = _runner(args, jobs=args.jobs, output_directory=args.output_dir)
    print(f"🤖 Running scenario: {scenario.name}")
    print("=" * 40)
    result = runner.run(scenario)

    if not result.certificate.get("feasible", False):
        print(f"❌ Certificate infeasible: {result.certificate.get('message')}")
        print(f"   Condition: {result.certificate.get('condition')}")
    else:
        print_summary(result.to_document())
    for kind, path in sorted(result.paths.items()):
        print(f"💾 {kind}: {path}")
    return result.exit_code


def print_summary(document: Dict[str, Any]) -> None:
    """Per-check verdict table."""
    cert = document.get("certificate", {})
    print("\n📊 Certificate:")
    if cert.get("feasible"):
        print(f"  source: {cert.get('source')}  rho: {cert.get('rho')}  a_gamma: {cert.get('a_gamma')}")
    else:
        print(f"  infeasible ({cert.get('condition')})")
    print("\n📊 Checks:")
    for report in document.get("reports", []):
        verdict = report["verdict"]
        icon = VERDICT_ICONS.get(verdict, "  ")
        print(f"  {icon} {report['check_name']:<16} {verdict:<13} margin {report['margin']}")
    summary = document.get("summary", {})
    if summary.get("inconclusive"):
        print(f"\n❔ Inconclusive: {', '.join(summary['inconclusive'])}")
    print()


def report_command(args: argparse.Namespace) -> int:
    document = load_report(Path(args.input))
    if args.summary:
        print_summary(document)
    else:
        print(json.dumps(document, indent=2, sort_keys=True))
    return int(document.get("summary", {}).get("exit_code", EXIT_OK))


COMMANDS = {
    "certify-kfp": certify_kfp,
    "find-sigma": find_sigma_command,
    "run": run_command,
    "report": report_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI."""
    parser = create_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    try:
        return COMMANDS[args.command](args)
    except ScenarioError as e:
        print(f"❌ Scenario error: {e}")
        return EXIT_SCHEMA
    except KeyboardInterrupt:
        print("\n👋 Interrupted by user")
        return EXIT_FAILED
    except (HypocertError, OSError) as e:
        print(f"❌ Fatal error: {e}")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
