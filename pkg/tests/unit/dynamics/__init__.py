"""Unit tests for hypocert.dynamics."""
