"""Analytic test-function families with exact derivatives up to order three.

Every function evaluates on a single point of shape ``(d,)`` or on a batch of
shape ``(..., d)``; derivatives add trailing axes of length ``d``.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ContractViolationError, UnsupportedFunctionError

FAMILY_KINDS = ("linear", "quadratic", "polynomial", "trigonometric", "gaussian_bump")


class TestFunction(ABC):
    """Smooth scalar function on R^d with analytic derivatives."""

    __test__ = False  # keep pytest from collecting this as a test class

    def __init__(self, arity: int, family_tag: str):
        if arity < 1:
            raise ContractViolationError(f"arity must be positive, got {arity}")
        self.arity = arity
        self.family_tag = family_tag

    @abstractmethod
    def value(self, z: np.ndarray) -> np.ndarray:
        """Function value, shape ``(...)``."""

    @abstractmethod
    def grad(self, z: np.ndarray) -> np.ndarray:
        """Gradient, shape ``(..., d)``."""

    @abstractmethod
    def hess(self, z: np.ndarray) -> np.ndarray:
        """Hessian, shape ``(..., d, d)``."""

    @abstractmethod
    def third(self, z: np.ndarray) -> np.ndarray:
        """Third derivative tensor, shape ``(..., d, d, d)``."""

    def describe(self) -> Dict[str, object]:
        return {"family": self.family_tag, "arity": self.arity, "type": type(self).__name__}

    def _point(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.arity:
            raise ContractViolationError(
                f"point has dimension {z.shape[-1]}, function expects {self.arity}"
            )
        return z

    def __add__(self, other: "TestFunction") -> "Combination":
        return Combination([self, other], [1.0, 1.0])

    def __mul__(self, scalar: float) -> "Combination":
        return Combination([self], [float(scalar)])

    __rmul__ = __mul__


def _falling(p: int, k: int) -> int:
    """p (p-1) ... (p-k+1)."""
    out = 1
    for i in range(k):
        out *= p - i
    return out


@dataclass(frozen=True)
class RidgeTerm:
    """One term ``coef * (w . z + offset) ** power``."""
    coef: float
    direction: Tuple[float, ...]
    offset: float
    power: int


class RidgePolynomial(TestFunction):
    """Sum of powers of affine forms plus a constant.

    Linear, quadratic and quartic polynomials are all written this way, which
    lets Gaussian expectations reduce to bivariate normal moments.
    """

    def __init__(self, arity: int, terms: Sequence[RidgeTerm], constant: float = 0.0,
                 family_tag: str = "polynomial"):
        super().__init__(arity, family_tag)
        for term in terms:
            if len(term.direction) != arity:
                raise ContractViolationError("ridge direction does not match arity")
            if term.power < 1 or term.power > 8:
                raise UnsupportedFunctionError(f"ridge power {term.power} outside [1, 8]")
        self.terms = list(terms)
        self.constant = float(constant)
        self._w = np.array([t.direction for t in self.terms], dtype=float).reshape(-1, arity)
        self._c = np.array([t.coef for t in self.terms], dtype=float)
        self._s = np.array([t.offset for t in self.terms], dtype=float)
        self._p = np.array([t.power for t in self.terms], dtype=int)

    @classmethod
    def linear(cls, u: Sequence[float], constant: float = 0.0) -> "RidgePolynomial":
        u = np.asarray(u, dtype=float)
        return cls(u.size, [RidgeTerm(1.0, tuple(u), 0.0, 1)], constant, family_tag="linear")

    @classmethod
    def constant_function(cls, arity: int, constant: float) -> "RidgePolynomial":
        return cls(arity, [], constant, family_tag="linear")

    @classmethod
    def from_quadratic(cls, Q: np.ndarray, g: Optional[Sequence[float]] = None,
                       constant: float = 0.0) -> "RidgePolynomial":
        """``0.5 z^T Q z + g^T z + constant`` through the eigendecomposition of Q."""
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ContractViolationError("Q must be square")
        Q = 0.5 * (Q + Q.T)
        lam, vecs = np.linalg.eigh(Q)
        terms = [RidgeTerm(0.5 * float(l), tuple(vecs[:, i]), 0.0, 2)
                 for i, l in enumerate(lam) if l != 0.0]
        if g is not None and np.any(np.asarray(g) != 0.0):
            terms.append(RidgeTerm(1.0, tuple(np.asarray(g, dtype=float)), 0.0, 1))
        return cls(Q.shape[0], terms, constant, family_tag="quadratic")

    @property
    def degree(self) -> int:
        return int(self._p.max()) if self.terms else 0

    def _u(self, z: np.ndarray) -> np.ndarray:
        return np.einsum("...d,kd->...k", z, self._w) + self._s

    def _coef(self, u: np.ndarray, k: int) -> np.ndarray:
        """c_j * falling(p_j, k) * u_j ** (p_j - k), zero when p_j < k."""
        fall = np.array([_falling(int(p), k) for p in self._p], dtype=float)
        expo = np.maximum(self._p - k, 0)
        return self._c * fall * u ** expo

    def value(self, z: np.ndarray) -> np.ndarray:
        z = self._point(z)
        if not self.terms:
            return np.full(z.shape[:-1], self.constant)
        return self._coef(self._u(z), 0).sum(axis=-1) + self.constant

    def grad(self, z: np.ndarray) -> np.ndarray:
        z = self._point(z)
        if not self.terms:
            return np.zeros(z.shape)
        return np.einsum("...k,kd->...d", self._coef(self._u(z), 1), self._w)

    def hess(self, z: np.ndarray) -> np.ndarray:
        z = self._point(z)
        if not self.terms:
            return np.zeros(z.shape + (self.arity,))
        return np.einsum("...k,ki,kj->...ij", self._coef(self._u(z), 2), self._w, self._w)

    def third(self, z: np.ndarray) -> np.ndarray:
        z = self._point(z)
        if not self.terms:
            return np.zeros(z.shape + (self.arity, self.arity))
        return np.einsum("...k,ki,kj,kl->...ijl", self._coef(self._u(z), 3),
                         self._w, self._w, self._w)

    def shifted(self, delta: float) -> "RidgePolynomial":
        """Same function plus a constant."""
        return RidgePolynomial(self.arity, self.terms, self.constant + delta, self.family_tag)

    def describe(self) -> Dict[str, object]:
        info = super().describe()
        info.update({"degree": self.degree, "terms": len(self.terms), "constant": self.constant})
        return info


class TrigSeries(TestFunction):
    """``sum_k c_k sin(w_k . z + phase_k)``."""

    def __init__(self, coefs: Sequence[float], frequencies: np.ndarray, phases: Sequence[float]):
        frequencies = np.atleast_2d(np.asarray(frequencies, dtype=float))
        super().__init__(frequencies.shape[1], "trigonometric")
        self._c = np.asarray(coefs, dtype=float)
        self._w = frequencies
        self._phi = np.asarray(phases, dtype=float)

    def _u(self, z: np.ndarray) -> np.ndarray:
        return np.einsum("...d,kd->...k", z, self._w) + self._phi

    def value(self, z: np.ndarray) -> np.ndarray:
        return (self._c * np.sin(self._u(self._point(z)))).sum(axis=-1)

    def grad(self, z: np.ndarray) -> np.ndarray:
        u = self._u(self._point(z))
        return np.einsum("...k,kd->...d", self._c * np.cos(u), self._w)

    def hess(self, z: np.ndarray) -> np.ndarray:
        u = self._u(self._point(z))
        return np.einsum("...k,ki,kj->...ij", -self._c * np.sin(u), self._w, self._w)

    def third(self, z: np.ndarray) -> np.ndarray:
        u = self._u(self._point(z))
        return np.einsum("...k,ki,kj,kl->...ijl", -self._c * np.cos(u), self._w, self._w, self._w)


class GaussianBump(TestFunction):
    """``c * exp(-|z - center|^2 / (2 width^2))``."""

    def __init__(self, center: Sequence[float], width: float, coef: float = 1.0):
        center = np.asarray(center, dtype=float)
        super().__init__(center.size, "gaussian_bump")
        if width <= 0:
            raise ContractViolationError("bump width must be positive")
        self.center = center
        self.width = float(width)
        self.coef = float(coef)
        self._s = 1.0 / self.width ** 2

    def _g(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        y = self._point(z) - self.center
        return y, self.coef * np.exp(-0.5 * self._s * np.sum(y * y, axis=-1))

    def value(self, z: np.ndarray) -> np.ndarray:
        return self._g(z)[1]

    def grad(self, z: np.ndarray) -> np.ndarray:
        y, g = self._g(z)
        return -self._s * y * g[..., None]

    def hess(self, z: np.ndarray) -> np.ndarray:
        y, g = self._g(z)
        eye = np.eye(self.arity)
        outer = np.einsum("...i,...j->...ij", y, y)
        return g[..., None, None] * (self._s ** 2 * outer - self._s * eye)

    def third(self, z: np.ndarray) -> np.ndarray:
        y, g = self._g(z)
        eye = np.eye(self.arity)
        cube = np.einsum("...i,...j,...k->...ijk", y, y, y)
        sym = (np.einsum("ij,...k->...ijk", eye, y)
               + np.einsum("ik,...j->...ijk", eye, y)
               + np.einsum("jk,...i->...ijk", eye, y))
        return g[..., None, None, None] * (-self._s ** 3 * cube + self._s ** 2 * sym)


class Combination(TestFunction):
    """Linear combination of test functions of equal arity."""

    def __init__(self, functions: Sequence[TestFunction], weights: Sequence[float]):
        if not functions or len(functions) != len(weights):
            raise ContractViolationError("combination needs matching functions and weights")
        arity = functions[0].arity
        if any(f.arity != arity for f in functions):
            raise ContractViolationError("combined functions differ in arity")
        super().__init__(arity, functions[0].family_tag)
        self.functions = list(functions)
        self.weights = [float(w) for w in weights]

    def _sum(self, method: str, z: np.ndarray) -> np.ndarray:
        return sum(w * getattr(f, method)(z) for f, w in zip(self.functions, self.weights))

    def value(self, z: np.ndarray) -> np.ndarray:
        return self._sum("value", z)

    def grad(self, z: np.ndarray) -> np.ndarray:
        return self._sum("grad", z)

    def hess(self, z: np.ndarray) -> np.ndarray:
        return self._sum("hess", z)

    def third(self, z: np.ndarray) -> np.ndarray:
        return self._sum("third", z)


class Product(TestFunction):
    """Pointwise product ``f * g`` with Leibniz-rule derivatives."""

    def __init__(self, f: TestFunction, g: TestFunction):
        if f.arity != g.arity:
            raise ContractViolationError("product factors differ in arity")
        super().__init__(f.arity, f.family_tag)
        self.f = f
        self.g = g

    def value(self, z: np.ndarray) -> np.ndarray:
        return self.f.value(z) * self.g.value(z)

    def grad(self, z: np.ndarray) -> np.ndarray:
        return (self.f.grad(z) * self.g.value(z)[..., None]
                + self.f.value(z)[..., None] * self.g.grad(z))

    def hess(self, z: np.ndarray) -> np.ndarray:
        fg, gg = self.f.grad(z), self.g.grad(z)
        cross = np.einsum("...i,...j->...ij", fg, gg)
        return (self.f.hess(z) * self.g.value(z)[..., None, None]
                + cross + np.swapaxes(cross, -1, -2)
                + self.f.value(z)[..., None, None] * self.g.hess(z))

    def third(self, z: np.ndarray) -> np.ndarray:
        f0, g0 = self.f.value(z), self.g.value(z)
        f1, g1 = self.f.grad(z), self.g.grad(z)
        f2, g2 = self.f.hess(z), self.g.hess(z)
        mixed = (np.einsum("...ij,...k->...ijk", f2, g1)
                 + np.einsum("...ik,...j->...ijk", f2, g1)
                 + np.einsum("...jk,...i->...ijk", f2, g1)
                 + np.einsum("...jk,...i->...ijk", g2, f1)
                 + np.einsum("...ik,...j->...ijk", g2, f1)
                 + np.einsum("...ij,...k->...ijk", g2, f1))
        return (self.f.third(z) * g0[..., None, None, None] + mixed
                + f0[..., None, None, None] * self.g.third(z))


def as_ridge(f: TestFunction) -> RidgePolynomial:
    """Flatten a polynomial test function into a single RidgePolynomial."""
    if isinstance(f, RidgePolynomial):
        return f
    if isinstance(f, Combination):
        terms: List[RidgeTerm] = []
        constant = 0.0
        for sub, weight in zip(f.functions, f.weights):
            ridge = as_ridge(sub)
            terms.extend(RidgeTerm(weight * t.coef, t.direction, t.offset, t.power)
                         for t in ridge.terms)
            constant += weight * ridge.constant
        return RidgePolynomial(f.arity, terms, constant, f.family_tag)
    raise UnsupportedFunctionError(
        f"{type(f).__name__} ({f.family_tag}) has no exact polynomial representation"
    )


@dataclass
class FunctionFamily:
    """Sampling recipe for one analytic family."""
    kind: str
    coefficient_range: Tuple[float, float] = (-1.0, 1.0)
    max_degree: int = 4
    max_terms: int = 3
    max_frequency: float = 2.0
    width_range: Tuple[float, float] = (0.3, 1.5)
    center_radius: float = 1.0
    extra: Dict[str, float] = field(default_factory=dict)

    @property
    def compact_support(self) -> bool:
        """Whether instances approximate compactly supported test functions."""
        return self.kind == "gaussian_bump"


def standard_families() -> List[FunctionFamily]:
    return [FunctionFamily(kind) for kind in FAMILY_KINDS]


def sample_function(family: FunctionFamily, dim: int, seed: int) -> TestFunction:
    """Draw one instance of ``family`` on R^dim, deterministic in ``seed``."""
    if dim < 1:
        raise ContractViolationError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    lo, hi = family.coefficient_range

    if family.kind == "linear":
        return RidgePolynomial.linear(rng.uniform(lo, hi, dim), float(rng.uniform(lo, hi)))

    if family.kind == "quadratic":
        B = rng.uniform(lo, hi, (dim, dim))
        return RidgePolynomial.from_quadratic(B + B.T, rng.uniform(lo, hi, dim),
                                              float(rng.uniform(lo, hi)))

    if family.kind == "polynomial":
        n_terms = int(rng.integers(1, family.max_terms + 1))
        terms = []
        for _ in range(n_terms):
            w = rng.standard_normal(dim)
            w /= max(np.linalg.norm(w), 1e-12)
            terms.append(RidgeTerm(float(rng.uniform(lo, hi)), tuple(w),
                                   float(rng.uniform(-1.0, 1.0)),
                                   int(rng.integers(1, family.max_degree + 1))))
        return RidgePolynomial(dim, terms, float(rng.uniform(lo, hi)), "polynomial")

    if family.kind == "trigonometric":
        n_terms = int(rng.integers(1, family.max_terms + 1))
        freqs = rng.uniform(-family.max_frequency, family.max_frequency, (n_terms, dim))
        return TrigSeries(rng.uniform(lo, hi, n_terms), freqs,
                          rng.uniform(0.0, 2.0 * math.pi, n_terms))

    if family.kind == "gaussian_bump":
        center = rng.uniform(-family.center_radius, family.center_radius, dim)
        width = float(rng.uniform(*family.width_range))
        return GaussianBump(center, width, float(rng.uniform(lo, hi)))

    raise UnsupportedFunctionError(f"unsupported function family: {family.kind}")


def sample_ball(rng: np.random.Generator, dim: int, radius: float = 1.0,
                size: Optional[int] = None) -> np.ndarray:
    """Uniform points in the Euclidean ball of given radius."""
    shape = (dim,) if size is None else (size, dim)
    direction = rng.standard_normal(shape)
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, () if size is None else (size, 1)) ** (1.0 / dim)
    return direction * r


def fd_step(x: np.ndarray) -> float:
    """Central-difference step ``1e-4 * (1 + |x|)``."""
    return 1e-4 * (1.0 + float(np.linalg.norm(x)))


def derivative_errors(f: TestFunction, x: np.ndarray, h: Optional[float] = None
                      ) -> Dict[str, float]:
    """Relative disagreement between each analytic derivative and central
    differences of the next lower one."""
    x = np.asarray(x, dtype=float)
    h = fd_step(x) if h is None else h
    eye = np.eye(f.arity)
    plus = x + h * eye
    minus = x - h * eye

    fd_grad = (f.value(plus) - f.value(minus)) / (2 * h)
    fd_hess = (f.grad(plus) - f.grad(minus)) / (2 * h)
    fd_third = (f.hess(plus) - f.hess(minus)) / (2 * h)

    def _rel(analytic: np.ndarray, numeric: np.ndarray) -> float:
        return float(np.max(np.abs(analytic - numeric)) / (1.0 + np.max(np.abs(analytic))))

    return {
        "grad": _rel(f.grad(x), fd_grad),
        "hess": _rel(f.hess(x), fd_hess),
        "third": _rel(f.third(x), fd_third),
    }
