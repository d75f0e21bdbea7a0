"""Test utilities for hypocert testing."""

from .assertion_helpers import *

__all__ = [
    'assert_report_valid',
    'assert_series_monotone',
    'assert_matrix_close',
    'assert_report_files',
]
