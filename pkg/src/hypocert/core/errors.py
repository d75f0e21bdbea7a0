"""Exception hierarchy for hypocert."""

from typing import Any, Dict, Optional


class HypocertError(Exception):
    """Base class for all hypocert errors."""


class ContractViolationError(HypocertError, ValueError):
    """Inputs violate a documented precondition (shapes, symmetry, positivity)."""


class UnsupportedFunctionError(HypocertError, TypeError):
    """A test function or potential lacks what an operation needs."""


class InfeasibleCertificateError(HypocertError):
    """No certificate exists for the requested parameters."""

    def __init__(self, message: str, condition: str, values: Optional[Dict[str, Any]] = None):
        super().__init__(f"{message} (requires {condition})")
        self.condition = condition
        self.values = values or {}


class PropagationError(HypocertError, FloatingPointError):
    """SDE state became non-finite."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class TransportConvergenceError(HypocertError):
    """Entropic transport iterations did not reach the marginal tolerance."""

    def __init__(self, message: str, marginal_violation: float, iterations: int):
        super().__init__(message)
        self.marginal_violation = marginal_violation
        self.iterations = iterations


class ScenarioError(HypocertError):
    """Scenario document failed strict schema validation."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
        self.line = line
        self.field = field
