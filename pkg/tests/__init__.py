"""Test suite for hypocert."""
