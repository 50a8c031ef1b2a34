"""
Cascaded FFT feature extraction

CSI power -> delay transform (single-sided) -> static clutter removal ->
transmitter angle compensation -> joint AoA/Doppler FFT -> peak search.
"""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy import fft as sp_fft
from scipy.interpolate import interp1d
from scipy.signal import get_window

from src.core.conversions import aoa_axis, delay_axis, doppler_axis
from src.core.exceptions import EmptyTensor, NumericalFailure
from src.core.models import CpiCube, FeatureTensor, SystemConfig

# Relative tolerance when comparing peak magnitudes for ties
_TIE_RTOL = 1e-12


@dataclass
class PowerCube:
    """|CSI|^2, subcarriers x antennas x time"""
    data: np.ndarray
    start_time: float = 0.0


@dataclass
class DelayCube:
    """Single-sided delay-domain tensor, delay bins x antennas x time"""
    data: np.ndarray
    delay_axis: np.ndarray
    start_time: float = 0.0


@dataclass
class Peak:
    """Global maximum of a feature tensor"""
    delay: float
    aoa: float
    doppler: float
    magnitude: float
    index: Tuple[int, int, int]


def compute_csi_power(cube: CpiCube) -> PowerCube:
    """Element-wise power; removes every unit-magnitude phase factor"""
    data = cube.data
    power = data.real ** 2 + data.imag ** 2
    return PowerCube(data=power, start_time=cube.start_time)


def regrid_subcarriers(data: np.ndarray, freqs: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Linearly resample the subcarrier axis (axis 0) onto a uniform grid

    The grid starts at the lowest subcarrier with the smallest native
    spacing. Uniform input is returned unchanged.

    Returns:
        (resampled data, effective spacing in Hz)
    """
    freqs = np.asarray(freqs, dtype=float)
    steps = np.diff(freqs)
    spacing = float(steps.min())
    if np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        return data, float(steps[0])

    count = int(round((freqs[-1] - freqs[0]) / spacing)) + 1
    grid = np.minimum(freqs[0] + np.arange(count) * spacing, freqs[-1])
    resampled = interp1d(freqs, data, axis=0, kind="linear", assume_sorted=True)(grid)
    return resampled, spacing


def delay_transform(power: PowerCube, cfg: SystemConfig) -> np.ndarray:
    """
    Unnormalized inverse DFT over subcarriers, zero-padded to fft_bins_delay

    Only strictly positive delays 1 .. N/2 - 1 are kept.
    """
    data, _ = regrid_subcarriers(power.data, cfg.freqs)
    spectrum = sp_fft.ifft(data, n=cfg.fft_bins_delay, axis=0, norm="forward")
    return spectrum[1:cfg.fft_bins_delay // 2]


def remove_static_clutter(x: np.ndarray, cfg: SystemConfig = None, start_time: float = 0.0) -> DelayCube:
    """Subtract the time mean of every (delay bin, antenna) series"""
    data = x - x.mean(axis=-1, keepdims=True)
    axis = delay_axis(cfg) if cfg is not None else np.arange(1, x.shape[0] + 1, dtype=float)
    return DelayCube(data=data, delay_axis=axis, start_time=start_time)


def compensate_tx_angle(x: DelayCube, cfg: SystemConfig) -> DelayCube:
    """Rotate antenna i by exp(+j 2 pi i d sin(theta_tx) / lambda)"""
    ant = np.arange(x.data.shape[1])
    weights = np.exp(1j * 2 * np.pi * ant * cfg.antenna_spacing * np.sin(cfg.tx_aoa) / cfg.wavelength)
    return DelayCube(data=x.data * weights[None, :, None], delay_axis=x.delay_axis, start_time=x.start_time)


def aoa_doppler_spectrum(x: DelayCube, cfg: SystemConfig) -> FeatureTensor:
    """
    Joint FFT over antennas and slow time for every delay bin

    Both axes are FFT-shifted; bins beyond +/- max_speed and non-physical
    AoA bins are dropped. A single antenna skips the spatial transform.
    """
    data = x.data
    if cfg.doppler_window != "rect":
        data = data * get_window(cfg.doppler_window, data.shape[-1], fftbins=True)[None, None, :]

    aoa_values, aoa_idx = aoa_axis(cfg)
    dop_values, dop_idx = doppler_axis(cfg)

    if data.shape[1] == 1:
        spectrum = sp_fft.fftshift(sp_fft.fft(data, n=cfg.fft_bins_doppler, axis=2), axes=2)
    else:
        spectrum = sp_fft.fftshift(
            sp_fft.fftn(data, s=(cfg.fft_bins_aoa, cfg.fft_bins_doppler), axes=(1, 2)),
            axes=(1, 2),
        )

    tensor = spectrum[:, aoa_idx][:, :, dop_idx]
    return FeatureTensor(
        data=tensor,
        delay_axis=x.delay_axis,
        aoa_axis=aoa_values,
        doppler_axis=dop_values,
        start_time=x.start_time,
    )


def find_global_peak(tensor: FeatureTensor) -> Peak:
    """
    Strongest bin of the tensor

    Ties go to the smallest delay bin, then the smallest |Doppler|, then
    the smallest AoA index.
    """
    if tensor.data.size == 0:
        raise EmptyTensor("Feature tensor has no bins left after gating")

    magnitude = np.abs(tensor.data)
    top = magnitude.max()
    if not np.isfinite(top):
        raise NumericalFailure("Feature tensor holds non-finite bins")
    candidates = np.argwhere(magnitude >= top * (1.0 - _TIE_RTOL))
    if len(candidates) > 1:
        order = np.lexsort((candidates[:, 1], np.abs(tensor.doppler_axis[candidates[:, 2]]), candidates[:, 0]))
        candidates = candidates[order]
    m, a, d = (int(v) for v in candidates[0])

    return Peak(
        delay=float(tensor.delay_axis[m]),
        aoa=float(tensor.aoa_axis[a]),
        doppler=float(tensor.doppler_axis[d]),
        magnitude=float(magnitude[m, a, d]),
        index=(m, a, d),
    )


def features_from_power(power: PowerCube, cfg: SystemConfig) -> FeatureTensor:
    """Delay transform onwards, starting from CSI power"""
    delayed = delay_transform(power, cfg)
    clean = remove_static_clutter(delayed, cfg, power.start_time)
    return aoa_doppler_spectrum(compensate_tx_angle(clean, cfg), cfg)


def extract_features(cube: CpiCube, cfg: SystemConfig) -> FeatureTensor:
    """CpiCube -> delay x AoA x Doppler feature tensor"""
    return features_from_power(compute_csi_power(cube), cfg)


def project_tensor(tensor: FeatureTensor) -> Dict[str, np.ndarray]:
    """Max-magnitude 2D projections of the tensor"""
    magnitude = np.abs(tensor.data)
    return {
        "delay_aoa": magnitude.max(axis=2),
        "delay_doppler": magnitude.max(axis=1),
        "aoa_doppler": magnitude.max(axis=0),
    }
