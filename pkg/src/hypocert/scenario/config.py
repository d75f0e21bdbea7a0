"""Scenario documents: strict JSON parsing into dataclasses.

Unknown keys, duplicate keys, missing required keys and wrong types raise
``ScenarioError`` anchored to the line of the offending key (or of the
enclosing object when a key is missing).
"""

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..core.errors import ScenarioError

CHECK_NAMES = (
    "assumption", "t2", "gradient_bound", "wasserstein", "poincare", "h1", "derivative", "invariant",
)
OPERATOR_KINDS = ("kfp_quadratic", "kfp_perturbed", "kolmogorov", "ou")
CERTIFICATE_SOURCES = ("closed_form", "sigma_search", "user_supplied")
COUPLINGS = ("synchronous", "independent")
TRANSPORT_SOLVERS = ("exact", "entropic")

NUMBER = (int, float)
NAME_PATTERN = re.compile(r"^[A-Za-z0-9_.-]+$")


@dataclass
class Numerics:
    """Numerical settings shared by all checks of a scenario."""
    N: int = 500
    dt: float = 1e-3
    t_end: float = 5.0
    times: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0, 5.0])
    seed: int = 42
    slack: float = 0.05
    trials: int = 500
    replicates: int = 10
    points: int = 3
    test_functions: int = 20
    burn_in: float = 10.0
    sample_radius: float = 20.0
    sample_points: int = 10_000
    b_weight: float = 1.0
    k2: float = 0.0
    coupling: str = "synchronous"
    transport: str = "exact"
    tolerances: Dict[str, float] = field(default_factory=lambda: {"t2": 1e-8, "fd": 1e-4})


@dataclass
class OperatorSpec:
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass
class CertificateSpec:
    source: str
    hessian_bounds: Optional[Tuple[float, float]] = None
    metric: Optional[List[List[float]]] = None
    rho: Optional[float] = None
    samples: int = 100
    max_iters: int = 500
    tol: float = 1e-6


@dataclass
class Scenario:
    name: str
    operator: OperatorSpec
    certificate: CertificateSpec
    checks: List[str]
    numerics: Numerics = field(default_factory=Numerics)
    lyapunov: Optional[Dict[str, Any]] = None
    description: str = ""
    # keys written explicitly in the numerics section
    numerics_set: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("numerics_set")
        if data["certificate"]["hessian_bounds"] is not None:
            data["certificate"]["hessian_bounds"] = list(data["certificate"]["hessian_bounds"])
        return data


def _numerics_fields() -> Dict[str, Any]:
    return {
        "N": int, "dt": NUMBER, "t_end": NUMBER, "times": "numbers", "seed": int,
        "slack": NUMBER, "trials": int, "replicates": int, "points": int,
        "test_functions": int, "burn_in": NUMBER, "sample_radius": NUMBER,
        "sample_points": int, "b_weight": NUMBER, "k2": NUMBER, "coupling": str, "transport": str,
        "tolerances": dict,
    }


OPERATOR_FIELDS: Dict[str, Dict[str, Any]] = {
    "kfp_quadratic": {"omega": NUMBER, "n": int},
    "kfp_perturbed": {"omega": NUMBER, "epsilon": NUMBER, "n": int},
    "kolmogorov": {},
    "ou": {"matrix": "matrix", "diffusion": "matrix"},
}
OPERATOR_REQUIRED = {"kfp_perturbed": ("epsilon",), "ou": ("matrix",)}

CERTIFICATE_FIELDS: Dict[str, Dict[str, Any]] = {
    "closed_form": {"hessian_bounds": dict},
    "sigma_search": {"samples": int, "max_iters": int, "tol": NUMBER},
    "user_supplied": {"metric": "matrix", "rho": NUMBER},
}
CERTIFICATE_REQUIRED = {"user_supplied": ("metric",)}


def _reject_duplicates(pairs: Sequence[Tuple[str, Any]]) -> Dict[str, Any]:
    seen: Dict[str, Any] = {}
    for key, value in pairs:
        if key in seen:
            raise ScenarioError(f"duplicate key '{key}'", field=key)
        seen[key] = value
    return seen


class _Document:
    """Raw text plus a key -> line lookup used to anchor errors."""

    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source
        self._lines = text.splitlines()

    def lines_of(self, key: str, start: int = 1) -> List[int]:
        pattern = re.compile(rf'"{re.escape(key)}"\s*:')
        return [number for number in range(max(start, 1), len(self._lines) + 1)
                if pattern.search(self._lines[number - 1])]

    def line_of(self, key: str, start: int = 1) -> Optional[int]:
        lines = self.lines_of(key, start)
        return lines[0] if lines else None

    def error(self, message: str, key: str, start: int = 1) -> ScenarioError:
        return ScenarioError(f"{self.source}: {message}", line=self.line_of(key, start) or start,
                             field=key)


def _is_type(value: Any, kind: Any) -> bool:
    if kind == "numbers":
        return isinstance(value, list) and all(_is_type(v, NUMBER) for v in value)
    if kind == "matrix":
        return isinstance(value, list) and len(value) > 0 and all(
            isinstance(row, list) and len(row) == len(value) and _is_type(row, "numbers")
            for row in value
        )
    if kind is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == NUMBER:
        return isinstance(value, NUMBER) and not isinstance(value, bool)
    return isinstance(value, kind)


def _check_section(doc: _Document, section: Dict[str, Any], allowed: Dict[str, Any],
                   required: Sequence[str], where: str, anchor: int) -> None:
    for key, value in section.items():
        if key not in allowed:
            raise doc.error(f"unknown field '{key}' in {where}", key, anchor)
        if not _is_type(value, allowed[key]):
            raise doc.error(f"field '{key}' in {where} has the wrong type", key, anchor)
    for key in required:
        if key not in section:
            raise ScenarioError(f"{doc.source}: missing required field '{key}' in {where}",
                                line=anchor, field=key)


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    """Parse and strictly validate a scenario document."""
    doc = _Document(text, source)
    try:
        raw = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}: invalid JSON: {exc.msg}", line=exc.lineno) from exc
    except ScenarioError as exc:
        lines = doc.lines_of(exc.field or "")
        raise ScenarioError(f"{source}: {exc}", line=lines[1] if len(lines) > 1 else None,
                            field=exc.field) from exc
    if not isinstance(raw, dict):
        raise ScenarioError(f"{source}: scenario must be a JSON object", line=1)
    if isinstance(raw.get("name"), str) and not NAME_PATTERN.match(raw["name"]):
        raise doc.error("name may only contain letters, digits, '.', '-' and '_'", "name")

    top = {"name": str, "description": str, "operator": dict, "certificate": dict,
           "checks": list, "numerics": dict, "lyapunov": dict}
    _check_section(doc, raw, top, ("name", "operator", "certificate", "checks"), "scenario", 1)

    op_line = doc.line_of("operator") or 1
    op_raw = dict(raw["operator"])
    kind = op_raw.pop("kind", None)
    if kind not in OPERATOR_KINDS:
        raise ScenarioError(f"{source}: operator kind must be one of {', '.join(OPERATOR_KINDS)}",
                            line=doc.line_of("kind", op_line) or op_line, field="kind")
    _check_section(doc, op_raw, OPERATOR_FIELDS[kind], OPERATOR_REQUIRED.get(kind, ()),
                   f"operator '{kind}'", op_line)

    cert_line = doc.line_of("certificate") or 1
    cert_raw = dict(raw["certificate"])
    source_kind = cert_raw.pop("source", None)
    if source_kind not in CERTIFICATE_SOURCES:
        raise ScenarioError(
            f"{source}: certificate source must be one of {', '.join(CERTIFICATE_SOURCES)}",
            line=doc.line_of("source", cert_line) or cert_line, field="source")
    _check_section(doc, cert_raw, CERTIFICATE_FIELDS[source_kind],
                   CERTIFICATE_REQUIRED.get(source_kind, ()), f"certificate '{source_kind}'", cert_line)
    bounds = None
    if "hessian_bounds" in cert_raw:
        bounds_line = doc.line_of("hessian_bounds", cert_line) or cert_line
        _check_section(doc, cert_raw["hessian_bounds"], {"m": NUMBER, "M": NUMBER}, ("m", "M"),
                       "hessian_bounds", bounds_line)
        bounds = (float(cert_raw["hessian_bounds"]["m"]), float(cert_raw["hessian_bounds"]["M"]))
    certificate = CertificateSpec(
        source=source_kind,
        hessian_bounds=bounds,
        metric=cert_raw.get("metric"),
        rho=float(cert_raw["rho"]) if "rho" in cert_raw else None,
        samples=int(cert_raw.get("samples", 100)),
        max_iters=int(cert_raw.get("max_iters", 500)),
        tol=float(cert_raw.get("tol", 1e-6)),
    )

    checks = raw["checks"]
    checks_line = doc.line_of("checks") or 1
    for name in checks:
        if name not in CHECK_NAMES:
            raise ScenarioError(f"{source}: unknown check '{name}'", line=checks_line, field="checks")
    if len(set(checks)) != len(checks):
        raise ScenarioError(f"{source}: checks are listed twice", line=checks_line, field="checks")

    numerics_raw = raw.get("numerics", {})
    num_line = doc.line_of("numerics") or 1
    _check_section(doc, numerics_raw, _numerics_fields(), (), "numerics", num_line)
    if "tolerances" in numerics_raw:
        _check_section(doc, numerics_raw["tolerances"], {"t2": NUMBER, "fd": NUMBER}, (),
                       "tolerances", doc.line_of("tolerances", num_line) or num_line)
    for key, allowed in (("coupling", COUPLINGS), ("transport", TRANSPORT_SOLVERS)):
        if key in numerics_raw and numerics_raw[key] not in allowed:
            raise doc.error(f"numerics field '{key}' must be one of {', '.join(allowed)}",
                            key, num_line)
    numerics = Numerics()
    for key, value in numerics_raw.items():
        if key == "tolerances":
            numerics.tolerances = {**numerics.tolerances, **{k: float(v) for k, v in value.items()}}
        elif key == "times":
            numerics.times = [float(t) for t in value]
        else:
            setattr(numerics, key, type(getattr(numerics, key))(value))

    lyapunov = raw.get("lyapunov")
    if lyapunov is not None:
        _check_section(doc, lyapunov, {"matrix": "matrix", "constant": NUMBER, "claimed_c": NUMBER},
                       ("matrix",), "lyapunov", doc.line_of("lyapunov") or 1)

    return Scenario(
        name=raw["name"],
        description=raw.get("description", ""),
        operator=OperatorSpec(kind=kind, params=op_raw),
        certificate=certificate,
        checks=list(checks),
        numerics=numerics,
        lyapunov=lyapunov,
        numerics_set=sorted(numerics_raw),
    )


def load_scenario(path: Path) -> Scenario:
    """Read a scenario document from disk."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror})") from exc
    return parse_scenario(text, source=str(path))
