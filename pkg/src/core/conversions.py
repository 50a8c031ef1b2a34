"""
Bin <-> physical unit conversions and axis builders
"""

import math
from typing import Tuple, Union

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from src.core.exceptions import NonPhysicalBin
from src.core.models import SystemConfig

ArrayLike = Union[float, np.ndarray]

# Tolerance on the arcsin argument before a bin counts as non-physical
_ARCSIN_TOL = 1e-12


def _aoa_argument(n: float, cfg: SystemConfig) -> float:
    return (cfg.wavelength / cfg.antenna_spacing) * (n / cfg.fft_bins_aoa - 0.5)


def aoa_bin_to_angle(n: int, cfg: SystemConfig) -> float:
    """
    Angle of the n-th FFT-shifted spatial bin

    Args:
        n: Bin index in [0, fft_bins_aoa)
        cfg: System configuration

    Returns:
        Angle in radians within [-pi/2, pi/2]
    """
    if not 0 <= n < cfg.fft_bins_aoa:
        raise ValueError(f"AoA bin {n} outside [0, {cfg.fft_bins_aoa})")
    arg = _aoa_argument(n, cfg)
    if abs(arg) > 1.0 + _ARCSIN_TOL:
        raise NonPhysicalBin(n, arg)
    return math.asin(max(-1.0, min(1.0, arg)))


def angle_to_aoa_bin(theta: float, cfg: SystemConfig) -> int:
    """Nearest spatial bin for an angle (inverse of aoa_bin_to_angle)"""
    n = cfg.fft_bins_aoa * (0.5 + cfg.antenna_spacing * math.sin(theta) / cfg.wavelength)
    return int(np.rint(n)) % cfg.fft_bins_aoa


def doppler_bin_to_velocity(f_d: ArrayLike, cfg: SystemConfig) -> ArrayLike:
    """Signed Doppler velocity c * f_d / f_c"""
    return SPEED_OF_LIGHT * f_d / cfg.carrier_freq


def velocity_to_doppler(v: ArrayLike, cfg: SystemConfig) -> ArrayLike:
    return v * cfg.carrier_freq / SPEED_OF_LIGHT


def delay_bin_to_range(m: int, cfg: SystemConfig) -> float:
    """Excess path length of delay bin m on the uniform effective grid"""
    if not 0 <= m < cfg.fft_bins_delay // 2:
        raise ValueError(f"Delay bin {m} outside the single-sided range")
    return SPEED_OF_LIGHT * m / (cfg.fft_bins_delay * cfg.effective_spacing)


def delay_bin_width(cfg: SystemConfig) -> float:
    """Delay resolution in seconds"""
    return 1.0 / (cfg.fft_bins_delay * cfg.effective_spacing)


def delay_axis(cfg: SystemConfig) -> np.ndarray:
    """Excess delays of the retained bins 1 .. N/2 - 1"""
    bins = np.arange(1, cfg.fft_bins_delay // 2)
    return bins * delay_bin_width(cfg)


def aoa_axis(cfg: SystemConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Physical AoA bins after FFT shift

    Returns:
        (angles in radians, indices of the kept bins in the shifted spectrum).
        A single-antenna array has one broadside bin.
    """
    if cfg.num_antennas == 1:
        return np.array([0.0]), np.array([0])

    indices = np.arange(cfg.fft_bins_aoa)
    args = (cfg.wavelength / cfg.antenna_spacing) * (indices / cfg.fft_bins_aoa - 0.5)
    keep = np.abs(args) <= 1.0 + _ARCSIN_TOL
    angles = np.arcsin(np.clip(args[keep], -1.0, 1.0))
    return angles, indices[keep]


def max_doppler(cfg: SystemConfig) -> float:
    """Doppler bound equivalent to max_speed"""
    return float(velocity_to_doppler(cfg.max_speed, cfg))


def doppler_axis(cfg: SystemConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Shifted Doppler frequencies within +/- max_speed and their indices"""
    freqs = np.fft.fftshift(np.fft.fftfreq(cfg.fft_bins_doppler, d=cfg.sample_interval))
    keep = np.abs(freqs) <= max_doppler(cfg) * (1.0 + 1e-12)
    return freqs[keep], np.flatnonzero(keep)


def doppler_bin_width(cfg: SystemConfig) -> float:
    return 1.0 / (cfg.fft_bins_doppler * cfg.sample_interval)
