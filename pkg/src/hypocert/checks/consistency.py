"""Mutual consistency of the three equivalent contraction statements."""

import logging
from itertools import combinations
from typing import Dict, List

from ..core.base import VerificationReport, Verdict

logger = logging.getLogger(__name__)

EQUIVALENT_CHECKS = ("t2", "gradient_bound", "wasserstein")


def check_equivalence(reports: Dict[str, VerificationReport]) -> VerificationReport:
    """Any (pass, fail) pair among the t2, gradient and Wasserstein verdicts is a failure.

    Inconclusive and degenerate verdicts never contradict anything.
    """
    present = {name: reports[name].verdict for name in EQUIVALENT_CHECKS if name in reports}
    conflicts: List[Dict[str, str]] = []
    for first, second in combinations(present, 2):
        pair = {present[first], present[second]}
        if pair == {Verdict.PASS, Verdict.FAIL}:
            conflicts.append({first: present[first].value, second: present[second].value})

    details: Dict[str, object] = {"verdicts": {k: v.value for k, v in present.items()},
                                  "conflicts": conflicts}
    missing = [name for name in EQUIVALENT_CHECKS if name not in present]
    if missing:
        details["note"] = f"not run: {', '.join(missing)}"
    if conflicts:
        logger.error(f"Contradictory verdicts across equivalent statements: {conflicts}")
        details["reason"] = "equivalent statements disagree"
    return VerificationReport(
        check_name="equivalence",
        verdict=Verdict.FAIL if conflicts else Verdict.PASS,
        margin=-float(len(conflicts)),
        details=details,
    )
