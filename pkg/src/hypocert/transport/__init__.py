"""Wasserstein distances between particle ensembles."""

from .wasserstein import w2_entropic, w2_exact, w2_gaussian

__all__ = ['w2_exact', 'w2_entropic', 'w2_gaussian']
