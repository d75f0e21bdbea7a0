"""Certificate construction: closed-form kinetic metrics, metric search, Lyapunov functions."""

from .kfp import KfpParams, PotentialSpec, build_operator, solve_kfp_params
from .lyapunov import LyapunovCandidate, LyapunovResult, check_assumption
from .sigma import InfeasibilityReport, SigmaCertificate, SigmaSearchOptions, find_sigma

__all__ = [
    'KfpParams',
    'PotentialSpec',
    'build_operator',
    'solve_kfp_params',
    'LyapunovCandidate',
    'LyapunovResult',
    'check_assumption',
    'InfeasibilityReport',
    'SigmaCertificate',
    'SigmaSearchOptions',
    'find_sigma',
]
