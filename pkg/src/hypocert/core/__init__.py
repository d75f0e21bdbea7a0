"""Core module for hypocert."""

from .base import Check, CheckRegistry, RunContext, SeriesPoint, VerificationReport, Verdict
from .errors import (
    ContractViolationError, HypocertError, InfeasibleCertificateError, PropagationError,
    ScenarioError, TransportConvergenceError, UnsupportedFunctionError,
)

__all__ = [
    'Check',
    'CheckRegistry',
    'RunContext',
    'SeriesPoint',
    'VerificationReport',
    'Verdict',
    'HypocertError',
    'ContractViolationError',
    'UnsupportedFunctionError',
    'InfeasibleCertificateError',
    'PropagationError',
    'TransportConvergenceError',
    'ScenarioError',
]
