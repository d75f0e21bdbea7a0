"""Base classes and interfaces for hypocert checks."""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np


class Verdict(str, Enum):
    """Outcome of a verification check."""

    PASS = "pass"
    FAIL = "fail"
    DEGENERATE = "degenerate"
    INCONCLUSIVE = "inconclusive"


def to_jsonable(value: Any) -> Any:
    """Convert numpy containers and non-finite floats into JSON-safe values."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


@dataclass
class SeriesPoint:
    """One row of a time series attached to a report."""
    time: float
    value: float
    stderr: float = 0.0
    seed: Optional[int] = None


@dataclass
class VerificationReport:
    """Result of a single check.

    The verdict is ``pass`` exactly when ``margin >= -tolerance`` unless the check
    downgraded it to ``degenerate`` or ``inconclusive``.
    """
    check_name: str
    verdict: Verdict
    margin: float
    tolerance: float = 0.0
    series: List[SeriesPoint] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None

    @classmethod
    def from_margin(cls, check_name: str, margin: float, tolerance: float, **kwargs: Any
                    ) -> "VerificationReport":
        """Build a report whose verdict follows from the margin alone."""
        verdict = Verdict.PASS if margin >= -tolerance else Verdict.FAIL
        provenance = dict(kwargs.pop("provenance", {}))
        provenance.setdefault("tolerance", tolerance)
        return cls(check_name=check_name, verdict=verdict, margin=float(margin),
                   tolerance=tolerance, provenance=provenance, **kwargs)

    @classmethod
    def from_error(cls, check_name: str, error: str, **kwargs: Any) -> "VerificationReport":
        """Report for a check that could not run."""
        return cls(check_name=check_name, verdict=Verdict.FAIL, margin=float("-inf"),
                   error=error, **kwargs)

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS

    @property
    def failed(self) -> bool:
        return self.verdict == Verdict.FAIL

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable({
            "check_name": self.check_name,
            "verdict": self.verdict,
            "margin": self.margin,
            "tolerance": self.tolerance,
            "series": [
                {"time": p.time, "value": p.value, "stderr": p.stderr, "seed": p.seed}
                for p in self.series
            ],
            "provenance": self.provenance,
            "details": self.details,
            "error": self.error,
        })

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "VerificationReport":
        def _float(value: Any) -> float:
            return float(value) if value is not None else float("nan")

        return cls(
            check_name=data["check_name"],
            verdict=Verdict(data["verdict"]),
            margin=_float(data["margin"]),
            tolerance=_float(data.get("tolerance", 0.0)),
            series=[SeriesPoint(time=_float(p["time"]), value=_float(p["value"]),
                                stderr=_float(p.get("stderr", 0.0)), seed=p.get("seed"))
                    for p in data.get("series", [])],
            provenance=data.get("provenance", {}),
            details=data.get("details", {}),
            error=data.get("error"),
        )


_SEVERITY = {Verdict.PASS: 0, Verdict.DEGENERATE: 1, Verdict.INCONCLUSIVE: 2, Verdict.FAIL: 3}


def worst_verdict(verdicts: List[Verdict]) -> Verdict:
    """fail > inconclusive > degenerate > pass."""
    return max(verdicts, key=lambda v: _SEVERITY[v], default=Verdict.PASS)


def combine_reports(check_name: str, reports: List[VerificationReport], **kwargs: Any
                    ) -> VerificationReport:
    """Merge sub-reports: worst verdict, smallest margin, concatenated series."""
    if not reports:
        return VerificationReport(check_name=check_name, verdict=Verdict.PASS, margin=0.0, **kwargs)
    series = [p for r in reports for p in r.series]
    details = dict(kwargs.pop("details", {}))
    details["parts"] = [{"verdict": r.verdict, "margin": r.margin, **r.details} for r in reports]
    errors = [r.error for r in reports if r.error]
    return VerificationReport(
        check_name=check_name,
        verdict=worst_verdict([r.verdict for r in reports]),
        margin=min(r.margin for r in reports),
        tolerance=max(r.tolerance for r in reports),
        series=series,
        details=details,
        error="; ".join(errors) if errors else None,
        **kwargs,
    )


@dataclass
class RunContext:
    """Context shared by the checks of one scenario run."""
    output_directory: Path
    scenario_name: str = "scenario"
    jobs: int = 1
    metadata: Dict[str, Any] = field(default_factory=dict)


class Check(ABC):
    """Abstract base class for all verification checks."""

    def __init__(self, name: str, description: str):
        self.name = name
        self.description = description

    @abstractmethod
    def execute(self, context: RunContext, **kwargs: Any) -> VerificationReport:
        """Run the check with given parameters."""

    @abstractmethod
    def validate_input(self, **kwargs: Any) -> bool:
        """Validate input parameters before execution."""

    def get_schema(self) -> Dict[str, Any]:
        """Get the check's parameter schema."""
        return {
            "name": self.name,
            "description": self.description,
            "parameters": self._get_parameter_schema()
        }

    @abstractmethod
    def _get_parameter_schema(self) -> Dict[str, Any]:
        """Get the parameter schema for this check."""

    def _invalid_input(self, **kwargs: Any) -> VerificationReport:
        missing = [
            key for key in self._get_parameter_schema().get("required", [])
            if kwargs.get(key) is None
        ]
        return VerificationReport.from_error(
            self.name, f"Invalid input parameters (missing or malformed: {', '.join(missing) or 'values'})"
        )


class CheckRegistry:
    """Registry for managing available checks."""

    def __init__(self) -> None:
        self._checks: Dict[str, Check] = {}

    def register(self, check: Check) -> None:
        """Register a check."""
        self._checks[check.name] = check

    def get_check(self, name: str) -> Optional[Check]:
        """Get a check by name."""
        return self._checks.get(name)

    def get_all_checks(self) -> Dict[str, Check]:
        """Get all registered checks."""
        return self._checks.copy()

    def get_check_schemas(self) -> List[Dict[str, Any]]:
        """Get schemas for all registered checks."""
        return [check.get_schema() for check in self._checks.values()]
