"""Unit tests for hypocert.checks."""
