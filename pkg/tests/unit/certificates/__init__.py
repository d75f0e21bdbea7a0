"""Unit tests for certificate construction."""
