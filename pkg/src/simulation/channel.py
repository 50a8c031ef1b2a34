"""
Bistatic CSI channel simulator

Static paths plus moving scatterers, observed through a receiver that is
not synchronized with the transmitter (timing offset, carrier frequency
offset, random per-antenna hardware phase).
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from scipy.constants import c as SPEED_OF_LIGHT

from src.core.exceptions import ConfigError, DegenerateGeometry, TrajectoryOutOfBounds
from src.core.models import CpiCube, SystemConfig
from src.simulation.trajectories import SwingTrajectory, WaypointTrajectory

# Minimum distance from Rx or Tx before geometry counts as degenerate
_MIN_DISTANCE = 1e-6

# Seed stream tags
_STREAM_IMPAIRMENT = 1
_STREAM_NOISE = 2
_STREAM_HARDWARE = 3

# Samples synthesized per block in synth_stream
_STREAM_BLOCK = 1024


@dataclass
class StaticPath:
    """Time-invariant path (direct Tx-Rx path or static clutter)"""
    amplitude: Union[float, np.ndarray]
    delay: float
    aoa: float

    def __post_init__(self):
        if np.any(np.asarray(self.amplitude) < 0):
            raise ConfigError("Static path amplitude must be non-negative")
        if self.delay < 0:
            raise ConfigError("Static path delay must be non-negative")

    @classmethod
    def direct(cls, cfg: SystemConfig, amplitude: float = 1.0) -> "StaticPath":
        """Line-of-sight path from the transmitter"""
        return cls(amplitude=amplitude, delay=cfg.tx_delay, aoa=cfg.tx_aoa)


@dataclass
class DynamicScatterer:
    """Moving reflector with constant amplitude"""
    amplitude: float
    trajectory: Union[WaypointTrajectory, SwingTrajectory]

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigError("Scatterer amplitude must be non-negative")


@dataclass
class ImpairmentModel:
    """
    Receiver impairments and additive noise

    Timing offset phase is 2*pi*f_j*delta_k with delta_k uniform in
    [0, timing_offset_max] per packet; CFO phase is 2*pi*cfo_hz*t; the
    per-antenna hardware phase is redrawn every power_cycle seconds
    (None keeps one draw for the whole run).
    """
    timing_offset_max: float = 0.0
    cfo_hz: float = 0.0
    hw_phase: bool = False
    noise_std: float = 0.0
    rng_seed: int = 0
    power_cycle: Optional[float] = None

    def __post_init__(self):
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        if self.timing_offset_max < 0:
            raise ConfigError("timing_offset_max must be non-negative")
        if self.power_cycle is not None and self.power_cycle <= 0:
            raise ConfigError("power_cycle must be positive")

    @classmethod
    def typical(cls, rng_seed: int = 0, noise_std: float = 0.0) -> "ImpairmentModel":
        """Commodity-hardware offsets: up to 100 ns TO, 2.5 kHz CFO, random antenna phases"""
        return cls(timing_offset_max=1e-7, cfo_hz=2.5e3, hw_phase=True, noise_std=noise_std, rng_seed=rng_seed)

    def without_phases(self) -> "ImpairmentModel":
        """Same noise realisation, all phase impairments removed"""
        return ImpairmentModel(noise_std=self.noise_std, rng_seed=self.rng_seed)

    def _rng(self, stream: int, index: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.rng_seed, stream, index]))

    def packet_phase(self, freqs: np.ndarray, times: np.ndarray, block: int) -> np.ndarray:
        """Combined TO and CFO phase, shape N_f x N_t"""
        phase = np.zeros((len(freqs), len(times)))
        if self.timing_offset_max > 0:
            deltas = self._rng(_STREAM_IMPAIRMENT, block).uniform(0.0, self.timing_offset_max, len(times))
            phase += 2 * np.pi * freqs[:, None] * deltas[None, :]
        if self.cfo_hz != 0.0:
            phase += 2 * np.pi * self.cfo_hz * times[None, :]
        return phase

    def antenna_phase(self, num_antennas: int, times: np.ndarray) -> np.ndarray:
        """Hardware phase per antenna and sample, shape N_a x N_t"""
        if not self.hw_phase:
            return np.zeros((num_antennas, len(times)))
        cycles = np.zeros(len(times), dtype=np.int64) if self.power_cycle is None else \
            np.floor(times / self.power_cycle).astype(np.int64)
        out = np.empty((num_antennas, len(times)))
        for cycle in np.unique(cycles):
            draw = self._rng(_STREAM_HARDWARE, int(cycle)).uniform(-np.pi, np.pi, num_antennas)
            out[:, cycles == cycle] = draw[:, None]
        return out

    def noise(self, shape: Tuple[int, ...], block: int) -> np.ndarray:
        if self.noise_std == 0.0:
            return np.zeros(shape, dtype=complex)
        rng = self._rng(_STREAM_NOISE, block)
        return self.noise_std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass
class Scene:
    """Everything the simulator needs besides the system configuration"""
    static_paths: List[StaticPath] = field(default_factory=list)
    scatterers: List[DynamicScatterer] = field(default_factory=list)
    impairments: ImpairmentModel = field(default_factory=ImpairmentModel)

    def is_empty(self) -> bool:
        return not self.static_paths and not self.scatterers


def _path_geometry(points: np.ndarray, velocities: np.ndarray, cfg: SystemConfig):
    """Vectorized path length, AoA and path-length rate for N positions"""
    tx = cfg.tx_position
    to_tx = points - tx
    r_tx = np.linalg.norm(to_tx, axis=1)
    r_rx = np.linalg.norm(points, axis=1)
    if np.any(r_tx < _MIN_DISTANCE) or np.any(r_rx < _MIN_DISTANCE):
        raise DegenerateGeometry("Scatterer coincides with the transmitter or receiver")
    path = r_tx + r_rx
    aoa = np.arctan2(points[:, 0], points[:, 1])
    rate = np.sum(velocities * to_tx, axis=1) / r_tx + np.sum(velocities * points, axis=1) / r_rx
    return path, aoa, rate


def bistatic_truth(pos, vel, cfg: SystemConfig) -> Tuple[float, float, float]:
    """
    True bistatic parameters of a point scatterer

    Args:
        pos: (x, y) position in m, receiver at the origin
        vel: (vx, vy) velocity in m/s
        cfg: System configuration (transmitter position, carrier)

    Returns:
        (absolute delay s, AoA rad, closing-positive Doppler Hz)
    """
    path, aoa, rate = _path_geometry(np.atleast_2d(np.asarray(pos, dtype=float)),
                                     np.atleast_2d(np.asarray(vel, dtype=float)), cfg)
    return float(path[0] / SPEED_OF_LIGHT), float(aoa[0]), float(-rate[0] / cfg.wavelength)


def _steering(freqs: np.ndarray, num_antennas: int, cfg: SystemConfig, delay, aoa) -> np.ndarray:
    """Delay and spatial phase term, shape N_f x N_a"""
    ant = np.arange(num_antennas)
    phase = -2 * np.pi * freqs[:, None] * delay \
        + 2 * np.pi * freqs[:, None] * ant[None, :] * cfg.antenna_spacing * math.sin(aoa) / SPEED_OF_LIGHT
    return np.exp(1j * phase)


def _static_channel(scene: Scene, cfg: SystemConfig) -> np.ndarray:
    freqs = cfg.freqs
    h = np.zeros((cfg.num_subcarriers, cfg.num_antennas), dtype=complex)
    for path in scene.static_paths:
        h += np.asarray(path.amplitude) * _steering(freqs, cfg.num_antennas, cfg, path.delay, path.aoa)
    return h


def _apply_impairments(h: np.ndarray, scene: Scene, cfg: SystemConfig, times: np.ndarray, block: int) -> np.ndarray:
    """CSI = H^e * H^h * (H + n) for h of shape N_f x N_a x N_t"""
    imp = scene.impairments
    noisy = h + imp.noise(h.shape, block)
    phase = imp.packet_phase(cfg.freqs, times, block)[:, None, :] \
        + imp.antenna_phase(cfg.num_antennas, times)[None, :, :]
    if not np.any(phase):
        return noisy
    return np.exp(1j * phase) * noisy


def synth_cpi(scene: Scene, cfg: SystemConfig, t0: float, seq: int = 0) -> CpiCube:
    """
    Synthesize one CPI with scatterer geometry frozen at t0

    Args:
        scene: Static paths, scatterers and impairments
        cfg: System configuration
        t0: CPI start time in seconds
        seq: CPI index, selects the random draws

    Returns:
        CpiCube of shape N_f x N_a x N_t
    """
    if scene.is_empty():
        raise ConfigError("Scene has neither static paths nor scatterers")

    n_t = cfg.cpi_len
    times = t0 + np.arange(n_t) * cfg.sample_interval
    freqs = cfg.freqs
    k = np.arange(n_t)

    h = np.repeat(_static_channel(scene, cfg)[:, :, None], n_t, axis=2)
    for scatterer in scene.scatterers:
        traj = scatterer.trajectory
        if t0 < traj.t_start or times[-1] > traj.t_end + 1e-9:
            raise TrajectoryOutOfBounds(f"Trajectory undefined on [{t0:.3f}, {times[-1]:.3f}] s")
        try:
            delay, aoa, doppler = bistatic_truth(traj.position(t0), traj.velocity(t0), cfg)
        except TrajectoryOutOfBounds:
            raise
        except DegenerateGeometry as e:
            raise TrajectoryOutOfBounds(str(e)) from e
        rotation = np.exp(1j * 2 * np.pi * freqs[:, None] * (doppler / cfg.carrier_freq) * k[None, :] * cfg.sample_interval)
        h += scatterer.amplitude * _steering(freqs, cfg.num_antennas, cfg, delay, aoa)[:, :, None] * rotation[:, None, :]

    data = _apply_impairments(h, scene, cfg, times, seq)
    logger.debug(f"Synthesized CPI {seq} at t0={t0:.3f} s")
    return CpiCube(data=data, start_time=float(t0), seq=seq)


def synth_stream(scene: Scene, cfg: SystemConfig, t_start: float, n_samples: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Synthesize a continuous capture, geometry evaluated at every sample

    Returns:
        (timestamps of shape N, payloads of shape N x N_f x N_a)
    """
    if scene.is_empty():
        raise ConfigError("Scene has neither static paths nor scatterers")
    if n_samples < 1:
        raise ConfigError("n_samples must be positive")

    timestamps = t_start + np.arange(n_samples) * cfg.sample_interval
    payloads = np.empty((n_samples, cfg.num_subcarriers, cfg.num_antennas), dtype=np.complex128)
    static = _static_channel(scene, cfg)
    freqs = cfg.freqs
    ant = np.arange(cfg.num_antennas)

    for block, start in enumerate(range(0, n_samples, _STREAM_BLOCK)):
        times = timestamps[start:start + _STREAM_BLOCK]
        h = np.repeat(static[:, :, None], len(times), axis=2)
        for scatterer in scene.scatterers:
            traj = scatterer.trajectory
            try:
                path, aoa, _ = _path_geometry(np.atleast_2d(traj.position(times)),
                                              np.atleast_2d(traj.velocity(times)), cfg)
            except TrajectoryOutOfBounds:
                raise
            except DegenerateGeometry as e:
                raise TrajectoryOutOfBounds(str(e)) from e
            phase = -2 * np.pi * freqs[:, None, None] * (path / SPEED_OF_LIGHT)[None, None, :] \
                + 2 * np.pi * freqs[:, None, None] * ant[None, :, None] * cfg.antenna_spacing \
                * np.sin(aoa)[None, None, :] / SPEED_OF_LIGHT
            h += scatterer.amplitude * np.exp(1j * phase)
        payloads[start:start + len(times)] = np.moveaxis(_apply_impairments(h, scene, cfg, times, block), 2, 0)

    logger.info(f"Synthesized {n_samples} CSI samples from t={t_start:.3f} s")
    return timestamps, payloads


def make_walker(base: WaypointTrajectory, torso_amplitude: float = 0.3, limb_amplitude: float = 0.3,
                limb_ratio: float = 0.3, stride_period: float = 1.0) -> List[DynamicScatterer]:
    """
    Torso plus two counter-swinging limbs

    Args:
        base: Torso trajectory
        torso_amplitude: Reflection amplitude of the torso
        limb_amplitude: Swing amplitude of each limb in m
        limb_ratio: Limb reflection amplitude relative to the torso
        stride_period: Swing period in s

    Returns:
        Scatterer list, torso first
    """
    limbs = [
        DynamicScatterer(torso_amplitude * limb_ratio, SwingTrajectory(base, limb_amplitude, stride_period, phase))
        for phase in (0.0, np.pi)
    ]
    return [DynamicScatterer(torso_amplitude, base)] + limbs
