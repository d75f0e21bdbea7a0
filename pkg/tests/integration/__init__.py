"""Integration tests for hypocert."""
