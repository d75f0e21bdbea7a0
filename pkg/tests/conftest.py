"""Pytest configuration and fixtures for hypocert tests."""

import json
import tempfile
from pathlib import Path
from typing import Any, Callable, Dict, Generator

import numpy as np
import pytest

from hypocert.certificates.kfp import (
    KfpParams, PotentialSpec, build_operator, cosine_perturbed_potential, quadratic_potential,
    solve_kfp_params,
)
from hypocert.core.base import RunContext
from hypocert.core.operator import DiffusionOperator, MetricForm
from hypocert.core.runner import RunnerConfig
from hypocert.dynamics.sde import SdeSystem
from hypocert.scenario.validator import ValidatorConfig


@pytest.fixture
def temp_workspace() -> Generator[Path, None, None]:
    """Create a temporary workspace directory for testing."""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield Path(temp_dir)


@pytest.fixture
def run_context(temp_workspace: Path) -> RunContext:
    """Context handed to checks executed outside the runner."""
    return RunContext(output_directory=temp_workspace, scenario_name="test")


@pytest.fixture
def quadratic_pot() -> PotentialSpec:
    """V(x) = x^2 / 2 in one dimension."""
    return quadratic_potential(1.0, 1)


@pytest.fixture
def perturbed_pot() -> PotentialSpec:
    """V(x) = x^2 / 2 + 0.1 cos(x)."""
    return cosine_perturbed_potential(1.0, 0.1, 1)


@pytest.fixture
def kfp_op(quadratic_pot: PotentialSpec) -> DiffusionOperator:
    return build_operator(quadratic_pot)


@pytest.fixture
def kfp_system(kfp_op: DiffusionOperator) -> SdeSystem:
    return SdeSystem.from_operator(kfp_op)


@pytest.fixture
def kfp_params() -> KfpParams:
    """Certificate for V = x^2 / 2 with the default slack."""
    return solve_kfp_params(1.0, 1.0, 0.05)


@pytest.fixture
def kfp_metric(kfp_params: KfpParams) -> MetricForm:
    return kfp_params.sde_metric()


@pytest.fixture
def ou_op() -> DiffusionOperator:
    """Non-normal stable Ornstein-Uhlenbeck operator."""
    return DiffusionOperator.linear(np.array([[-1.0, 2.0], [0.0, -1.0]]), np.eye(2), name="ou")


@pytest.fixture
def runner_config(temp_workspace: Path) -> RunnerConfig:
    """Runner writing into the temporary workspace, validator without audit log."""
    return RunnerConfig(
        output_directory=str(temp_workspace / "out"),
        verbose_logging=False,  # Quiet during tests
        validator_config=ValidatorConfig(strict_mode=True),
    )


@pytest.fixture
def scenario_document() -> Callable[..., str]:
    """Build a small scenario document, overriding top-level sections."""
    def make(**overrides: Any) -> str:
        document: Dict[str, Any] = {
            "name": "small_ou",
            "description": "Stable OU process with the identity metric",
            "operator": {"kind": "ou", "matrix": [[-1.0, 0.0], [0.0, -2.0]]},
            "certificate": {"source": "user_supplied", "metric": [[1.0, 0.0], [0.0, 1.0]]},
            "checks": ["t2", "derivative"],
            "numerics": {"seed": 7, "trials": 50, "points": 2, "test_functions": 3},
        }
        document.update(overrides)
        return json.dumps(document, indent=2) + "\n"

    return make


@pytest.fixture
def scenario_file(temp_workspace: Path, scenario_document: Callable[..., str]) -> Path:
    """Scenario document on disk."""
    path = temp_workspace / "scenario.json"
    path.write_text(scenario_document(), encoding="utf-8")
    return path
