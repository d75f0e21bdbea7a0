"""Particle simulation of diffusions and exact oracles for linear drift."""

from .oracle import linear_oracle_moments, stationary_covariance
from .sde import CoupledRun, Ensemble, SdeSystem, evolve_ensemble, run_coupled

__all__ = [
    'SdeSystem',
    'Ensemble',
    'CoupledRun',
    'evolve_ensemble',
    'run_coupled',
    'linear_oracle_moments',
    'stationary_covariance',
]
