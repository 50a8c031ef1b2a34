"""
Scatterer trajectories: piecewise-linear walks and swinging limbs
"""

import math
from typing import List, Sequence, Tuple

import numpy as np

from src.core.exceptions import ConfigError, TrajectoryOutOfBounds

# Slack allowed at the trajectory ends (floating point time stamps)
_TIME_TOL = 1e-9


class WaypointTrajectory:
    """Piecewise-linear trajectory through timestamped waypoints"""

    def __init__(self, times: Sequence[float], points: Sequence[Sequence[float]]):
        self.times = np.asarray(times, dtype=float)
        self.points = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(self.times) != len(self.points):
            raise ConfigError("Waypoint times and points differ in length")
        if len(self.times) < 1:
            raise ConfigError("Trajectory needs at least one waypoint")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("Waypoint times must be strictly increasing")

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1]) if len(self.times) > 1 else math.inf

    def _check(self, t: np.ndarray) -> None:
        if np.any(t < self.t_start - _TIME_TOL) or np.any(t > self.t_end + _TIME_TOL):
            raise TrajectoryOutOfBounds(
                f"Time outside trajectory span [{self.t_start:.3f}, {self.t_end:.3f}] s"
            )

    def position(self, t):
        """Position(s) at time(s) t, shape (2,) or (N, 2)"""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        self._check(t_arr)
        if len(self.times) == 1:
            out = np.repeat(self.points, len(t_arr), axis=0)
        else:
            out = np.column_stack([
                np.interp(t_arr, self.times, self.points[:, 0]),
                np.interp(t_arr, self.times, self.points[:, 1]),
            ])
        return out[0] if np.ndim(t) == 0 else out

    def velocity(self, t):
        """Segment velocity at time(s) t; knots take the outgoing segment"""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        self._check(t_arr)
        if len(self.times) == 1:
            out = np.zeros((len(t_arr), 2))
        else:
            seg_vel = np.diff(self.points, axis=0) / np.diff(self.times)[:, None]
            idx = np.clip(np.searchsorted(self.times, t_arr, side="right") - 1, 0, len(seg_vel) - 1)
            out = seg_vel[idx]
        return out[0] if np.ndim(t) == 0 else out


class SwingTrajectory:
    """Base trajectory plus a sinusoidal swing along the walking direction (a limb)"""

    def __init__(self, base: WaypointTrajectory, amplitude: float, period: float, phase: float = 0.0):
        if period <= 0:
            raise ConfigError("Swing period must be positive")
        self.base = base
        self.amplitude = amplitude
        self.period = period
        self.phase = phase

    @property
    def t_start(self) -> float:
        return self.base.t_start

    @property
    def t_end(self) -> float:
        return self.base.t_end

    def _direction(self, t) -> np.ndarray:
        vel = np.atleast_2d(self.base.velocity(t))
        norm = np.linalg.norm(vel, axis=1, keepdims=True)
        heading = np.where(norm > 0, vel / np.where(norm > 0, norm, 1.0), np.array([[0.0, 1.0]]))
        return heading

    def position(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        swing = self.amplitude * np.sin(2 * np.pi * t_arr / self.period + self.phase)
        out = np.atleast_2d(self.base.position(t_arr)) + swing[:, None] * self._direction(t_arr)
        return out[0] if np.ndim(t) == 0 else out

    def velocity(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        omega = 2 * np.pi / self.period
        swing_rate = self.amplitude * omega * np.cos(omega * t_arr + self.phase)
        out = np.atleast_2d(self.base.velocity(t_arr)) + swing_rate[:, None] * self._direction(t_arr)
        return out[0] if np.ndim(t) == 0 else out


# Walking patterns: vertices of the path (m), traversed back and forth or as a loop
WALK_SHAPES = {
    "linear": ([(-1.5, 0.0), (2.5, 0.0)], False),
    "vshape": ([(-1.5, 1.5), (0.5, -1.5), (2.5, 1.5)], False),
    "rectangle": ([(-1.0, -1.5), (3.0, -1.5), (3.0, 1.5), (-1.0, 1.5)], True),
}


def make_walk(shape: str = "linear", speed: float = 1.0, duration: float = 30.0,
              anchor: Tuple[float, float] = (0.0, 5.0), t_start: float = 0.0) -> WaypointTrajectory:
    """
    Constant-speed walk along one of the standard patterns

    Args:
        shape: 'linear' (back and forth), 'vshape' or 'rectangle' (loop)
        speed: Walking speed in m/s
        duration: Length of the walk in seconds
        anchor: Offset added to the pattern vertices
        t_start: Time of the first waypoint

    Returns:
        WaypointTrajectory covering [t_start, t_start + duration]
    """
    if shape not in WALK_SHAPES:
        raise ConfigError(f"Unknown walk shape '{shape}' (expected one of {sorted(WALK_SHAPES)})")
    if speed <= 0 or duration <= 0:
        raise ConfigError("Walk speed and duration must be positive")

    vertices, closed = WALK_SHAPES[shape]
    base = np.asarray(vertices, dtype=float) + np.asarray(anchor, dtype=float)
    if closed:
        cycle = np.vstack([base, base[:1]])
    else:
        cycle = np.vstack([base, base[-2::-1]])

    points: List[np.ndarray] = [cycle[0]]
    times: List[float] = [t_start]
    t_end = t_start + duration
    idx = 1
    while times[-1] < t_end:
        target = cycle[idx % len(cycle)]
        if np.allclose(target, points[-1]):
            idx += 1
            continue
        step = np.linalg.norm(target - points[-1]) / speed
        if times[-1] + step >= t_end:
            frac = (t_end - times[-1]) / step
            points.append(points[-1] + frac * (target - points[-1]))
            times.append(t_end)
            break
        points.append(target)
        times.append(times[-1] + step)
        idx += 1

    return WaypointTrajectory(times, points)
