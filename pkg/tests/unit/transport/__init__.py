"""Unit tests for hypocert.transport."""
