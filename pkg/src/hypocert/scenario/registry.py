"""Operator builders and built-in scenarios."""

import json
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..certificates.kfp import (
    PotentialSpec, build_operator, cosine_perturbed_potential, quadratic_potential,
)
from ..core.errors import ScenarioError
from ..core.operator import DiffusionOperator
from .config import OperatorSpec, Scenario, parse_scenario

KOLMOGOROV_DRIFT = np.array([[0.0, 1.0], [0.0, 0.0]])
KOLMOGOROV_DIFFUSION = np.diag([0.0, 1.0])


def build_from_spec(spec: OperatorSpec) -> Tuple[DiffusionOperator, Optional[PotentialSpec]]:
    """Construct the operator (and kinetic potential, if any) a scenario describes."""
    params = spec.params
    if spec.kind == "kfp_quadratic":
        pot = quadratic_potential(float(params.get("omega", 1.0)), int(params.get("n", 1)))
        return build_operator(pot), pot
    if spec.kind == "kfp_perturbed":
        pot = cosine_perturbed_potential(float(params.get("omega", 1.0)), float(params["epsilon"]),
                                         int(params.get("n", 1)))
        return build_operator(pot), pot
    if spec.kind == "kolmogorov":
        # d^2/dv^2 + v d/dx on (x, v)
        return DiffusionOperator.linear(KOLMOGOROV_DRIFT, KOLMOGOROV_DIFFUSION, name="kolmogorov"), None
    if spec.kind == "ou":
        J = np.asarray(params["matrix"], dtype=float)
        A = np.asarray(params.get("diffusion", np.eye(J.shape[0])), dtype=float)
        return DiffusionOperator.linear(J, A, name="ou"), None
    raise ScenarioError(f"unknown operator kind '{spec.kind}'", field="kind")


BUILTIN_SCENARIOS: Dict[str, Dict[str, Any]] = {
    "kfp_quadratic_demo": {
        "name": "kfp_quadratic_demo",
        "description": "Kinetic Fokker-Planck with V(x) = x^2/2 and the closed-form twisted metric",
        "operator": {"kind": "kfp_quadratic", "omega": 1.0, "n": 1},
        "certificate": {"source": "closed_form"},
        "checks": ["assumption", "t2", "gradient_bound", "derivative", "wasserstein", "invariant",
                   "poincare", "h1"],
        "numerics": {"N": 500, "dt": 0.001, "t_end": 5.0, "times": [0.5, 1.0, 2.0, 5.0],
                     "seed": 42, "slack": 0.05, "replicates": 10},
    },
    "kfp_perturbed_demo": {
        "name": "kfp_perturbed_demo",
        "description": "Kinetic Fokker-Planck with V(x) = x^2/2 + 0.1 cos(x)",
        "operator": {"kind": "kfp_perturbed", "omega": 1.0, "epsilon": 0.1, "n": 1},
        "certificate": {"source": "closed_form"},
        "checks": ["assumption", "t2", "gradient_bound", "wasserstein"],
        "numerics": {"N": 200, "dt": 0.002, "times": [0.5, 1.0, 2.0], "seed": 42, "slack": 0.05,
                     "trials": 500, "replicates": 5, "points": 2, "test_functions": 4},
    },
    "kolmogorov_demo": {
        "name": "kolmogorov_demo",
        "description": "Unconfined Kolmogorov operator: bounded growth, no contraction",
        "operator": {"kind": "kolmogorov"},
        "certificate": {"source": "user_supplied", "metric": [[1.0, 0.0], [0.0, 1.0]]},
        "checks": ["t2", "gradient_bound", "derivative", "wasserstein"],
        "numerics": {"N": 300, "times": [0.5, 1.0, 2.0], "seed": 42, "replicates": 5},
    },
    "ou_demo": {
        "name": "ou_demo",
        "description": "Non-normal Ornstein-Uhlenbeck process certified by the metric search",
        "operator": {"kind": "ou", "matrix": [[-1.0, 2.0], [0.0, -1.0]]},
        "certificate": {"source": "sigma_search", "samples": 1},
        "checks": ["assumption", "t2", "gradient_bound", "derivative", "wasserstein", "invariant"],
        "numerics": {"N": 300, "times": [0.5, 1.0, 2.0], "seed": 42, "replicates": 5,
                     "burn_in": 8.0},
    },
    "infeasible_demo": {
        "name": "infeasible_demo",
        "description": "Hessian bounds [0.1, 7.9] violate the closed-form feasibility condition",
        "operator": {"kind": "kfp_perturbed", "omega": 2.0, "epsilon": 3.9, "n": 1},
        "certificate": {"source": "closed_form"},
        "checks": ["t2"],
        "numerics": {"seed": 42},
    },
}


def builtin_names() -> List[str]:
    return sorted(BUILTIN_SCENARIOS)


def builtin_scenario(name: str) -> Scenario:
    """Parse a built-in scenario through the same strict path as a file."""
    if name not in BUILTIN_SCENARIOS:
        raise ScenarioError(f"unknown built-in scenario '{name}' (available: {', '.join(builtin_names())})")
    return parse_scenario(builtin_document(name), source=f"<builtin:{name}>")


def builtin_document(name: str) -> str:
    return json.dumps(BUILTIN_SCENARIOS[name], indent=2) + "\n"
