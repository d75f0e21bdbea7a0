"""Scenario documents, validation and built-in scenarios."""

from .config import Numerics, Scenario, load_scenario, parse_scenario
from .registry import builtin_names, builtin_scenario
from .validator import SchemaViolation, ScenarioValidator, ValidatorConfig

__all__ = [
    'Numerics',
    'Scenario',
    'load_scenario',
    'parse_scenario',
    'builtin_names',
    'builtin_scenario',
    'SchemaViolation',
    'ScenarioValidator',
    'ValidatorConfig',
]
