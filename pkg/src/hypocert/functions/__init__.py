"""Test functions with exact derivatives and their Gaussian moments."""

from .testfn import FunctionFamily, RidgePolynomial, TestFunction, sample_function

__all__ = ['FunctionFamily', 'RidgePolynomial', 'TestFunction', 'sample_function']
