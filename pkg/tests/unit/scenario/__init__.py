"""Unit tests for hypocert.scenario."""
