"""
Constant-acceleration EKF with a bistatic range-rate pseudo-measurement

State: [x, y, vx, vy, ax, ay]. Measurement: [x, y, v] where v is the
closing speed -d(|p - Tx| + |p|)/dt derived from the Doppler shift.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from src.core.exceptions import NumericalFailure
from src.core.models import SystemConfig

STATE_DIM = 6
MEAS_DIM = 3

# Condition number above which the innovation covariance counts as singular
_MAX_CONDITION = 1e12


@dataclass
class Track:
    """EKF track with lifecycle counters"""
    state: np.ndarray
    cov: np.ndarray
    track_id: int = 0
    age: int = 1
    hits: int = 1
    consecutive_misses: int = 0
    confirmed: bool = False
    last_update: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return self.state[0:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.state[2:4]

    @property
    def visibility(self) -> float:
        return self.hits / self.age if self.age else 0.0


def transition_matrix(dt: float) -> np.ndarray:
    """Constant-acceleration kinematics for both axes"""
    f = np.eye(STATE_DIM)
    for axis in range(2):
        f[axis, axis + 2] = dt
        f[axis, axis + 4] = 0.5 * dt * dt
        f[axis + 2, axis + 4] = dt
    return f


def process_noise(dt: float, jerk_psd: float) -> np.ndarray:
    """Continuous white-jerk process noise"""
    dt2, dt3 = dt * dt, dt ** 3
    dt4, dt5 = dt ** 4, dt ** 5
    block = jerk_psd * np.array([
        [dt5 / 20, dt4 / 8, dt3 / 6],
        [dt4 / 8, dt3 / 3, dt2 / 2],
        [dt3 / 6, dt2 / 2, dt],
    ])
    q = np.zeros((STATE_DIM, STATE_DIM))
    for axis in range(2):
        idx = [axis, axis + 2, axis + 4]
        q[np.ix_(idx, idx)] = block
    return q


def measurement_noise(cfg: SystemConfig) -> np.ndarray:
    return np.diag([cfg.ekf_pos_std ** 2, cfg.ekf_pos_std ** 2, cfg.ekf_doppler_std ** 2])


def _unit_vectors(state: np.ndarray, cfg: SystemConfig):
    p = state[0:2]
    to_tx = p - cfg.tx_position
    r1 = np.linalg.norm(to_tx)
    r2 = np.linalg.norm(p)
    if r1 == 0 or r2 == 0:
        raise NumericalFailure("Track position coincides with the transmitter or receiver")
    return to_tx / r1, p / r2, r1, r2


def measurement_function(state: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """h(state) = [x, y, closing speed]"""
    u1, u2, _, _ = _unit_vectors(state, cfg)
    v = state[2:4]
    return np.array([state[0], state[1], -(u1 @ v + u2 @ v)])


def measurement_jacobian(state: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Analytic Jacobian of measurement_function"""
    u1, u2, r1, r2 = _unit_vectors(state, cfg)
    v = state[2:4]
    jac = np.zeros((MEAS_DIM, STATE_DIM))
    jac[0, 0] = 1.0
    jac[1, 1] = 1.0
    jac[2, 0:2] = -((v - (u1 @ v) * u1) / r1 + (v - (u2 @ v) * u2) / r2)
    jac[2, 2:4] = -(u1 + u2)
    return jac


def ekf_predict(track: Track, dt: float, jerk_psd: float = 1.0) -> Track:
    """Propagate a track by dt seconds"""
    if dt <= 0:
        raise ValueError(f"Prediction step must be positive, got {dt}")
    f = transition_matrix(dt)
    cov = f @ track.cov @ f.T + process_noise(dt, jerk_psd)
    return replace(track, state=f @ track.state, cov=0.5 * (cov + cov.T))


def ekf_update(track: Track, z: np.ndarray, cfg: SystemConfig, r: Optional[np.ndarray] = None) -> Track:
    """
    Correct a predicted track with z = [x, y, closing speed]

    Uses the Joseph-form covariance update and re-symmetrizes the result.

    Raises:
        NumericalFailure: innovation covariance is singular or non-finite
    """
    r = measurement_noise(cfg) if r is None else r
    h = measurement_jacobian(track.state, cfg)
    innovation = np.asarray(z, dtype=float) - measurement_function(track.state, cfg)

    s = h @ track.cov @ h.T + r
    if not np.all(np.isfinite(s)) or np.linalg.cond(s) > _MAX_CONDITION:
        raise NumericalFailure("Innovation covariance is singular")

    gain = np.linalg.solve(s, h @ track.cov).T
    state = track.state + gain @ innovation

    i_kh = np.eye(STATE_DIM) - gain @ h
    cov = i_kh @ track.cov @ i_kh.T + gain @ r @ gain.T
    cov = 0.5 * (cov + cov.T)
    if not np.all(np.isfinite(state)) or not np.all(np.isfinite(cov)):
        raise NumericalFailure("EKF update produced non-finite values")
    return replace(track, state=state, cov=cov)


def innovation_nis(track: Track, z: np.ndarray, cfg: SystemConfig) -> float:
    """Normalized innovation squared of z against a predicted track"""
    h = measurement_jacobian(track.state, cfg)
    s = h @ track.cov @ h.T + measurement_noise(cfg)
    innovation = np.asarray(z, dtype=float) - measurement_function(track.state, cfg)
    return float(innovation @ np.linalg.solve(s, innovation))
