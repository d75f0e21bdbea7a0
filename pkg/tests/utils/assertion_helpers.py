"""Assertion helper utilities for testing."""

import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from hypocert.core.base import VerificationReport, Verdict
from hypocert.core.runner import SERIES_HEADER


def assert_report_valid(report: VerificationReport,
                        expected_verdict: Optional[Verdict] = None,
                        required_detail_keys: Optional[List[str]] = None) -> None:
    """Assert that a verification report is well formed and meets expectations.

    Args:
        report: Report to validate
        expected_verdict: Verdict the check should have reached
        required_detail_keys: Keys that must be present in details

    Raises:
        AssertionError: If the report is malformed
    """
    assert isinstance(report, VerificationReport), f"Expected VerificationReport, got {type(report)}"
    assert isinstance(report.verdict, Verdict), "verdict must be a Verdict"
    assert isinstance(report.margin, float), "margin must be a float"
    assert isinstance(report.details, dict), "details must be a dictionary"
    assert isinstance(report.provenance, dict), "provenance must be a dictionary"

    if expected_verdict is not None:
        assert report.verdict == expected_verdict, (
            f"Expected {expected_verdict.value} but got {report.verdict.value} "
            f"(margin {report.margin}, error {report.error}, reason {report.details.get('reason')})"
        )

    if report.verdict == Verdict.PASS:
        assert report.error is None, f"Passing report carries an error: {report.error}"
        assert report.margin >= -report.tolerance, "pass requires margin >= -tolerance"

    if required_detail_keys:
        for key in required_detail_keys:
            assert key in report.details, f"Required detail key missing: {key}"

    # Round trip through JSON must not raise
    json.dumps(report.to_dict(), allow_nan=False)


def assert_series_monotone(values: Iterable[float], decreasing: bool = True, slack: float = 0.0) -> None:
    """Assert that a sequence is monotone up to ``slack``."""
    values = list(values)
    for earlier, later in zip(values, values[1:]):
        if decreasing:
            assert later <= earlier + slack, f"series increases: {earlier} -> {later}"
        else:
            assert later >= earlier - slack, f"series decreases: {earlier} -> {later}"


def assert_matrix_close(actual: np.ndarray, expected: np.ndarray, atol: float = 1e-10,
                        rtol: float = 0.0) -> None:
    """Entrywise closeness with a readable failure message."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    assert actual.shape == expected.shape, f"shape {actual.shape} != {expected.shape}"
    error = float(np.max(np.abs(actual - expected))) if actual.size else 0.0
    assert np.allclose(actual, expected, atol=atol, rtol=rtol), f"max entry error {error:.3e}"


def assert_report_files(directory: Path, name: str) -> None:
    """The runner wrote a parseable report, a long-format series table and a meta file."""
    report_path = directory / f"{name}.report.json"
    series_path = directory / f"{name}.series.csv"
    meta_path = directory / f"{name}.meta.json"
    for path in (report_path, series_path, meta_path):
        assert path.exists(), f"missing output file {path.name}"

    document = json.loads(report_path.read_text(encoding="utf-8"))
    assert {"scenario", "certificate", "reports", "summary"} <= set(document)

    with open(series_path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        assert next(reader) == SERIES_HEADER
        for row in reader:
            assert len(row) == len(SERIES_HEADER)
            float(row[1])
            value = float(row[2])
            assert not math.isnan(value) or row[2] == "nan"
