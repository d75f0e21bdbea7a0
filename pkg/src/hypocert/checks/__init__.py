"""Verification checks for hypocoercive contraction certificates."""

from typing import List

from ..core.base import Check
from .assumption import AssumptionCheck
from .consistency import check_equivalence
from .gradient import GradientBoundCheck, ShortTimeDerivativeCheck
from .h1 import H1DecayCheck, H1Params
from .poincare import PoincareCheck
from .t2 import T2Check
from .wasserstein import InvariantConvergenceCheck, WassersteinCheck


def default_checks() -> List[Check]:
    """One instance of every available check."""
    return [
        AssumptionCheck(),
        T2Check(),
        GradientBoundCheck(),
        ShortTimeDerivativeCheck(),
        WassersteinCheck(),
        InvariantConvergenceCheck(),
        PoincareCheck(),
        H1DecayCheck(),
    ]


__all__ = [
    'AssumptionCheck',
    'T2Check',
    'GradientBoundCheck',
    'ShortTimeDerivativeCheck',
    'WassersteinCheck',
    'InvariantConvergenceCheck',
    'PoincareCheck',
    'H1DecayCheck',
    'H1Params',
    'check_equivalence',
    'default_checks',
]
