"""Unit tests for hypocert.core."""
