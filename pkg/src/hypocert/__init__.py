"""Hypocert - hypocoercive contraction certificates and their numerical verification."""

from .core.base import Check, CheckRegistry, RunContext, VerificationReport, Verdict
from .core.errors import HypocertError, InfeasibleCertificateError, ScenarioError
from .core.runner import RunnerConfig, RunResult, ScenarioRunner
from .certificates.kfp import KfpParams, solve_kfp_params
from .certificates.sigma import SigmaCertificate, find_sigma
from .scenario.config import Scenario, load_scenario, parse_scenario
from .scenario.registry import builtin_scenario

__version__ = "0.1.0"

__all__ = [
    "Check",
    "CheckRegistry",
    "RunContext",
    "VerificationReport",
    "Verdict",
    "HypocertError",
    "InfeasibleCertificateError",
    "ScenarioError",
    "RunnerConfig",
    "RunResult",
    "ScenarioRunner",
    "KfpParams",
    "solve_kfp_params",
    "SigmaCertificate",
    "find_sigma",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "builtin_scenario",
]
