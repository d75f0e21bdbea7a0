"""Unit tests for hypocert."""
