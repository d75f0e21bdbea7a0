"""Unit tests for hypocert.functions."""
