"""
Micro-Doppler spectrograms from per-CPI peak coefficients

The complex value at the 3D-FFT peak of each CPI forms a slow-time
series; gaps are interpolated, each window of md_window_len coefficients
is zero-padded and transformed, and the magnitudes are log-scaled and
min-max normalized.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sp_fft

from src.core.exceptions import AllZero, InsufficientData
from src.core.features.cascaded_fft import PowerCube, find_global_peak
from src.core.models import FeatureTensor, SystemConfig

LOG_EPSILON = 1e-12


@dataclass
class CoefficientSeries:
    """Peak coefficients, one per CPI stride"""
    values: np.ndarray
    times: np.ndarray
    valid_mask: np.ndarray

    @classmethod
    def from_lists(cls, values: Sequence[Optional[complex]], times: Sequence[float]) -> "CoefficientSeries":
        """None entries become invalid samples"""
        mask = np.array([v is not None for v in values], dtype=bool)
        data = np.array([0j if v is None else complex(v) for v in values], dtype=complex)
        return cls(values=data, times=np.asarray(times, dtype=float), valid_mask=mask)

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class Spectrogram:
    """Doppler-time matrix, windows x md_fft_len"""
    matrix: np.ndarray
    time_axis: np.ndarray
    doppler_axis: np.ndarray

    def ridge(self) -> np.ndarray:
        """Doppler of the strongest bin in every window"""
        return self.doppler_axis[np.argmax(np.abs(self.matrix), axis=1)]


def extract_peak_coefficient(tensor: FeatureTensor) -> complex:
    """Complex tensor value at the global peak"""
    peak = find_global_peak(tensor)
    return complex(tensor.data[peak.index])


def interpolate_gaps(series: CoefficientSeries) -> CoefficientSeries:
    """
    Fill invalid entries by linear interpolation of real and imaginary parts

    Leading and trailing gaps take the nearest valid value.
    """
    valid = series.valid_mask
    if valid.sum() < 2:
        raise InsufficientData(f"Need at least 2 valid coefficients, have {int(valid.sum())}")
    if valid.all():
        return series

    t_valid = series.times[valid]
    values = series.values[valid]
    filled = np.interp(series.times, t_valid, values.real) + 1j * np.interp(series.times, t_valid, values.imag)
    logger.debug(f"Interpolated {int((~valid).sum())} of {len(series)} coefficients")
    return CoefficientSeries(values=filled, times=series.times.copy(), valid_mask=np.ones(len(series), dtype=bool))


def window_doppler_fft(series: CoefficientSeries, cfg: SystemConfig) -> Spectrogram:
    """
    Zero-padded Doppler FFT of every window of md_window_len coefficients

    Windows advance by one coefficient. The result keeps complex values;
    time_axis holds window centre times.
    """
    length = cfg.md_window_len
    if len(series) < length:
        raise InsufficientData(f"Series of {len(series)} coefficients is shorter than the window ({length})")

    windows = sliding_window_view(series.values, length)
    rows = sp_fft.fftshift(sp_fft.fft(windows, n=cfg.md_fft_len, axis=1), axes=1)
    doppler = sp_fft.fftshift(sp_fft.fftfreq(cfg.md_fft_len, d=cfg.md_sample_interval))
    centres = sliding_window_view(series.times, length).mean(axis=1)
    return Spectrogram(matrix=rows, time_axis=centres, doppler_axis=doppler)


def normalize_spectrogram(rows) -> Spectrogram:
    """
    20 log10(|x| + eps), then min-max scaling over the whole matrix

    A matrix with zero dynamic range maps to all zeros.
    """
    if isinstance(rows, Spectrogram):
        matrix, time_axis, doppler_axis = rows.matrix, rows.time_axis, rows.doppler_axis
    else:
        matrix = np.asarray(rows)
        time_axis = np.arange(matrix.shape[0], dtype=float)
        doppler_axis = np.arange(matrix.shape[1], dtype=float) if matrix.ndim > 1 else np.zeros(0)

    magnitude = np.abs(matrix)
    if not np.any(magnitude):
        raise AllZero("Spectrogram has no nonzero entry")

    log_mag = 20.0 * np.log10(magnitude + LOG_EPSILON)
    span = log_mag.max() - log_mag.min()
    scaled = np.zeros_like(log_mag) if span == 0 else (log_mag - log_mag.min()) / span
    return Spectrogram(matrix=scaled, time_axis=time_axis, doppler_axis=doppler_axis)


def build_spectrogram(series: CoefficientSeries, cfg: SystemConfig) -> Spectrogram:
    """Interpolate, window-FFT and normalize a coefficient series"""
    spectrogram = normalize_spectrogram(window_doppler_fft(interpolate_gaps(series), cfg))
    logger.info(f"Spectrogram: {spectrogram.matrix.shape[0]} windows x {spectrogram.matrix.shape[1]} Doppler bins")
    return spectrogram


def tensor_doppler_profile(tensor: FeatureTensor) -> np.ndarray:
    """Energy per Doppler bin summed over delay and AoA"""
    power = tensor.data.real ** 2 + tensor.data.imag ** 2
    return power.sum(axis=(0, 1))


def power_doppler_profile(power: PowerCube, cfg: SystemConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Doppler profile of clutter-removed CSI power without delay single-siding

    The input is real, so the profile is symmetric and shows the mirror
    image at -f_D with the same strength as +f_D.

    Returns:
        (profile, Doppler axis in Hz), both FFT-shifted
    """
    data = power.data - power.data.mean(axis=-1, keepdims=True)
    spectrum = sp_fft.fftshift(sp_fft.fft(data, n=cfg.fft_bins_doppler, axis=-1), axes=-1)
    profile = (np.abs(spectrum) ** 2).sum(axis=tuple(range(data.ndim - 1)))
    freqs = sp_fft.fftshift(sp_fft.fftfreq(cfg.fft_bins_doppler, d=cfg.sample_interval))
    return profile, freqs
