"""Exact moments for linear drift with constant noise (Ornstein-Uhlenbeck type)."""

import logging
from typing import Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm, solve_continuous_lyapunov

from ..core.errors import ContractViolationError

logger = logging.getLogger(__name__)

ORACLE_RTOL = 1e-10
ORACLE_ATOL = 1e-12


def _square(J: np.ndarray) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ContractViolationError(f"drift matrix must be square, got shape {J.shape}")
    return J


def flow_matrix(J: np.ndarray, t: float) -> np.ndarray:
    """e^{tJ}."""
    return expm(float(t) * _square(J))


def euler_propagator(J: np.ndarray, dt: float, steps: int) -> np.ndarray:
    """(I + dt J)^steps, the flow of the Euler scheme for linear drift."""
    J = _square(J)
    return np.linalg.matrix_power(np.eye(J.shape[0]) + dt * J, int(steps))


def linear_oracle_moments(J: np.ndarray, noise: np.ndarray, mean0: np.ndarray, cov0: np.ndarray,
                          t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and covariance at time t of dZ = J Z dt + noise dB.

    The mean is e^{tJ} mean0. The covariance integrates C' = J C + C J^T + noise noise^T
    with an adaptive eighth-order Runge-Kutta scheme.
    """
    J = _square(J)
    d = J.shape[0]
    noise = np.asarray(noise, dtype=float).reshape(d, -1)
    mean0 = np.asarray(mean0, dtype=float)
    cov0 = np.asarray(cov0, dtype=float)
    if mean0.shape != (d,) or cov0.shape != (d, d):
        raise ContractViolationError("initial moments do not match the drift dimension")
    if t < 0:
        raise ContractViolationError(f"time must be non-negative, got {t}")
    if t == 0:
        return mean0.copy(), cov0.copy()

    Q = noise @ noise.T

    def rhs(_: float, c: np.ndarray) -> np.ndarray:
        C = c.reshape(d, d)
        return (J @ C + C @ J.T + Q).ravel()

    sol = solve_ivp(rhs, (0.0, float(t)), cov0.ravel(), method="DOP853",
                    rtol=ORACLE_RTOL, atol=ORACLE_ATOL)
    if not sol.success:
        raise ContractViolationError(f"covariance integration failed: {sol.message}")
    cov = sol.y[:, -1].reshape(d, d)
    logger.debug(f"covariance ODE to t={t}: {sol.nfev} evaluations")
    return flow_matrix(J, t) @ mean0, 0.5 * (cov + cov.T)


def linear_transition(J: np.ndarray, noise: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """(flow, cov) with Z_t = flow z + N(0, cov) for a start at the point z."""
    d = _square(J).shape[0]
    _, cov = linear_oracle_moments(J, noise, np.zeros(d), np.zeros((d, d)), t)
    return flow_matrix(J, t), cov


def stationary_covariance(J: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Solution of J C + C J^T + noise noise^T = 0 for a stable J."""
    J = _square(J)
    if np.linalg.eigvals(J).real.max() >= 0.0:
        raise ContractViolationError("drift matrix is not stable; no stationary covariance")
    noise = np.asarray(noise, dtype=float).reshape(J.shape[0], -1)
    C = solve_continuous_lyapunov(J, -noise @ noise.T)
    return 0.5 * (C + C.T)
