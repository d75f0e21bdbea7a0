"""Euler-Maruyama simulation of the diffusion dZ = b(Z) dt + sigma dB generated by L.

``sigma sigma^T = 2 A`` so that the generator of the simulated process is L.
Every particle owns a counter-based Philox stream keyed by (seed, stream, index)
and draws its noise in fixed chunks, so results do not depend on how particles
are split across workers.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..core.errors import ContractViolationError, PropagationError
from ..core.operator import DiffusionOperator, MetricForm, induced_distance

logger = logging.getLogger(__name__)

NOISE_CHUNK = 256
BLOCK_SIZE = 128
DEFAULT_DT = 1e-3


def particle_generator(seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent generator for one particle."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index)))))


@dataclass
class SdeSystem:
    """Operator plus a noise matrix with noise_matrix noise_matrix^T = 2 diffusion."""
    op: DiffusionOperator
    noise_matrix: np.ndarray

    def __post_init__(self) -> None:
        self.noise_matrix = np.asarray(self.noise_matrix, dtype=float).reshape(self.op.dim, -1)
        gap = np.max(np.abs(self.noise_matrix @ self.noise_matrix.T - 2.0 * self.op.diffusion))
        if gap > 1e-10:
            raise ContractViolationError(
                f"noise matrix does not reproduce twice the diffusion (error {gap:.3e})"
            )

    @classmethod
    def from_operator(cls, op: DiffusionOperator) -> "SdeSystem":
        """Square root of 2A, restricted to the directions that carry noise."""
        A = op.diffusion
        diag = np.diag(A)
        if np.array_equal(A, np.diag(diag)):
            idx = np.flatnonzero(diag > 0.0)
            noise = np.eye(op.dim)[:, idx] * np.sqrt(2.0 * diag[idx])
        else:
            lam, vecs = np.linalg.eigh(A)
            keep = lam > 1e-14 * max(1.0, float(lam.max()))
            noise = vecs[:, keep] * np.sqrt(2.0 * lam[keep])
        if noise.shape[1] == 0:
            noise = np.zeros((op.dim, 1))
        return cls(op, noise)

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def noise_dim(self) -> int:
        return self.noise_matrix.shape[1]


@dataclass
class Ensemble:
    """Uniformly weighted particle cloud, shape ``(N, d)``."""
    particles: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        if self.particles.ndim != 2 or self.particles.shape[0] < 1:
            raise ContractViolationError("an ensemble needs at least one particle")

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.size, 1.0 / self.size)

    def mean(self) -> np.ndarray:
        return self.particles.mean(axis=0)

    def covariance(self) -> np.ndarray:
        if self.size == 1:
            return np.zeros((self.dim, self.dim))
        return np.cov(self.particles, rowvar=False).reshape(self.dim, self.dim)

    @classmethod
    def from_gaussian(cls, mean: Sequence[float], cov: np.ndarray, size: int, seed: int,
                      stream: int = 0) -> "Ensemble":
        mean = np.asarray(mean, dtype=float)
        if size < 1:
            raise ContractViolationError("an ensemble needs at least one particle")
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))
        particles = rng.multivariate_normal(mean, np.asarray(cov, dtype=float), size=size, method="eigh")
        return cls(particles, {"source": "gaussian", "seed": int(seed), "stream": int(stream)})

    @classmethod
    def point_mass(cls, point: Sequence[float], size: int = 1) -> "Ensemble":
        return cls(np.tile(np.asarray(point, dtype=float), (size, 1)), {"source": "point_mass"})

    def to_csv(self, path: Union[str, Path]) -> None:
        """One row per particle, columns z0..z{d-1}, provenance in a comment header."""
        columns = ",".join(f"z{i}" for i in range(self.dim))
        header = f"# hypocert ensemble\n# provenance: {json.dumps(self.provenance, sort_keys=True)}\n{columns}"
        np.savetxt(Path(path), self.particles, delimiter=",", fmt="%.17g", header=header, comments="")

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "Ensemble":
        provenance: Dict[str, Any] = {}
        rows: List[str] = []
        lines = Path(path).read_text().splitlines()
        for line in lines:
            if line.startswith("# provenance:"):
                provenance = json.loads(line.split(":", 1)[1])
            elif line.startswith("#") or line.startswith("z0") or not line.strip():
                continue
            else:
                rows.append(line)
        if not rows:
            raise ContractViolationError(f"{path}: ensemble file has no particles")
        return cls(np.loadtxt(rows, delimiter=",", ndmin=2), provenance)


@dataclass
class CoupledRun:
    """Two trajectories driven by identical noise, sampled on a time grid."""
    times: np.ndarray
    dist_series: np.ndarray
    metric: MetricForm
    differences: np.ndarray
    final_states: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)


def step_euler_maruyama(sys: SdeSystem, state: np.ndarray, dt: float,
                        noise_increment: np.ndarray) -> np.ndarray:
    """state + b(state) dt + sigma dW for one state ``(d,)`` or a batch ``(B, d)``.

    ``noise_increment`` has variance dt per component.
    """
    if dt <= 0:
        raise ContractViolationError(f"time step must be positive, got {dt}")
    state = np.asarray(state, dtype=float)
    kick = np.einsum("ik,...k->...i", sys.noise_matrix, np.asarray(noise_increment, dtype=float),
                     optimize=False)
    new = state + sys.op.drift(state) * dt + kick
    finite = np.isfinite(new)
    if not finite.all():
        if new.ndim == 1:
            index = int(np.flatnonzero(~finite)[0])
            raise PropagationError(f"state component {index} became non-finite", index)
        index = int(np.flatnonzero(~finite.all(axis=-1))[0])
        raise PropagationError(f"particle {index} became non-finite", index)
    return new


def _step_counts(times: Sequence[float], dt: float) -> List[int]:
    if dt <= 0:
        raise ContractViolationError(f"time step must be positive, got {dt}")
    steps = []
    previous = -1
    for t in times:
        if t < 0:
            raise ContractViolationError(f"times must be non-negative, got {t}")
        k = int(round(t / dt))
        if abs(k * dt - t) > 1e-9 * max(1.0, t):
            raise ContractViolationError(f"time {t} is not a multiple of dt={dt}")
        if k < previous:
            raise ContractViolationError("times must be non-decreasing")
        steps.append(k)
        previous = k
    return steps


def _evolve_block(sys: SdeSystem, start: np.ndarray, indices: np.ndarray, record: List[int],
                  dt: float, seed: int, stream: int) -> List[np.ndarray]:
    gens = [particle_generator(seed, stream, int(i)) for i in indices]
    sqrt_dt = np.sqrt(dt)
    state = start.copy()
    snapshots: List[np.ndarray] = []
    targets = iter(record)
    target = next(targets, None)
    step = 0
    while target is not None and target == 0:
        snapshots.append(state.copy())
        target = next(targets, None)
    while target is not None:
        noise = np.stack([g.standard_normal((NOISE_CHUNK, sys.noise_dim)) for g in gens], axis=1)
        for j in range(NOISE_CHUNK):
            try:
                state = step_euler_maruyama(sys, state, dt, sqrt_dt * noise[j])
            except PropagationError as exc:
                particle = int(indices[exc.index])
                raise PropagationError(
                    f"particle {particle} became non-finite at step {step + 1}", particle
                ) from exc
            step += 1
            while target is not None and step == target:
                snapshots.append(state.copy())
                target = next(targets, None)
            if target is None:
                break
    return snapshots


def evolve_snapshots(sys: SdeSystem, ens: Ensemble, times: Sequence[float], dt: float = DEFAULT_DT,
                     seed: int = 0, jobs: int = 1, stream: int = 0) -> List[Ensemble]:
    """Evolve every particle once and return the ensemble at each requested time."""
    if ens.dim != sys.dim:
        raise ContractViolationError(f"ensemble dimension {ens.dim} does not match system {sys.dim}")
    record = _step_counts(times, dt)
    starts = range(0, ens.size, BLOCK_SIZE)
    blocks = [(ens.particles[s:s + BLOCK_SIZE], np.arange(s, min(s + BLOCK_SIZE, ens.size)))
              for s in starts]

    def run(block: Any) -> List[np.ndarray]:
        return _evolve_block(sys, block[0], block[1], record, dt, seed, stream)

    if jobs > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(run, blocks))
    else:
        results = [run(b) for b in blocks]

    logger.debug(f"evolved {ens.size} particles over {record[-1] if record else 0} steps "
                 f"in {len(blocks)} blocks (jobs={jobs})")
    out = []
    for i, t in enumerate(times):
        provenance = {**ens.provenance, "evolved": {"seed": int(seed), "stream": int(stream),
                                                    "dt": float(dt), "t": float(t)}}
        out.append(Ensemble(np.concatenate([r[i] for r in results], axis=0), provenance))
    return out


def evolve_ensemble(sys: SdeSystem, ens: Ensemble, t_end: float, dt: float = DEFAULT_DT,
                    seed: int = 0, jobs: int = 1, stream: int = 0) -> Ensemble:
    """P_t^* applied to the empirical measure of ``ens``."""
    return evolve_snapshots(sys, ens, [t_end], dt, seed, jobs, stream)[-1]


def run_coupled(sys: SdeSystem, z1: Sequence[float], z2: Sequence[float], t_end: float, dt: float,
                S: MetricForm, seed: int, record_dt: Optional[float] = None,
                stream: int = 0) -> CoupledRun:
    """Synchronously coupled pair: both trajectories consume identical increments."""
    if t_end <= 0:
        raise ContractViolationError(f"t_end must be positive, got {t_end}")
    record_dt = dt if record_dt is None else record_dt
    every = int(round(record_dt / dt))
    if every < 1 or abs(every * dt - record_dt) > 1e-9 * max(1.0, record_dt):
        raise ContractViolationError(f"dt={dt} does not divide the recording step {record_dt}")
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ContractViolationError(f"dt={dt} does not divide t_end={t_end}")

    pair = np.array([np.asarray(z1, dtype=float), np.asarray(z2, dtype=float)])
    if pair.shape[1] != sys.dim:
        raise ContractViolationError("coupled states do not match the system dimension")
    gen = particle_generator(seed, stream, 0)
    sqrt_dt = np.sqrt(dt)

    record = [0] + list(range(every, n_steps + 1, every))
    if record[-1] != n_steps:
        record.append(n_steps)
    diffs = [pair[0] - pair[1]]
    step = 0
    while step < n_steps:
        noise = gen.standard_normal((NOISE_CHUNK, sys.noise_dim))
        for j in range(min(NOISE_CHUNK, n_steps - step)):
            pair = step_euler_maruyama(sys, pair, dt, sqrt_dt * noise[j])
            step += 1
            if step % every == 0 or step == n_steps:
                diffs.append(pair[0] - pair[1])

    differences = np.array(diffs)
    times = np.array(record, dtype=float) * dt
    return CoupledRun(
        times=times,
        dist_series=np.atleast_1d(induced_distance(S, differences, np.zeros_like(differences))),
        metric=S,
        differences=differences,
        final_states=pair,
        provenance={"seed": int(seed), "stream": int(stream), "dt": float(dt), "t_end": float(t_end)},
    )
