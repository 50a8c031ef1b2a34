"""
Domain models shared by every pipeline stage

SystemConfig is an immutable pydantic model; per-CPI value types are
plain dataclasses carrying numpy arrays.
"""

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, computed_field, field_validator, model_validator
from scipy.constants import c as SPEED_OF_LIGHT

from src.core.exceptions import ConfigError, CsiFormatError

# Derived fields recomputed on every construction, never read back from input
COMPUTED_FIELDS = {"tx_delay", "md_sample_interval"}


class SystemConfig(BaseModel):
    """Radio, geometry and processing constants for one bistatic Tx-Rx pair"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Radio
    carrier_freq: float
    subcarrier_freqs: Tuple[float, ...]
    num_antennas: int
    antenna_spacing: float
    sample_interval: float = 0.001

    # Processing sizes
    cpi_len: int = 128
    fft_bins_delay: int = 128
    fft_bins_aoa: int = 32
    fft_bins_doppler: int = 128
    cpi_stride: int = 2
    doppler_window: Literal["rect", "hann"] = "rect"

    # Geometry (Rx at the origin, x = r sin(theta), y = r cos(theta))
    tx_range: float
    tx_aoa: float

    # Detection and fusion
    max_speed: float = 5.0
    snr_threshold: float = 5.0
    zscore_threshold: float = 3.0
    fusion_window: float = 1.5

    # Micro-Doppler
    md_window_len: int = 64
    md_fft_len: int = 128

    # Tracker
    ekf_jerk_psd: float = 1.0
    ekf_pos_std: float = 0.3
    ekf_doppler_std: float = 0.1
    assoc_gate: float = 2.0
    confirm_age: int = 20
    confirm_visibility: float = 0.6
    confirm_max_misses: int = 5
    delete_misses: int = 20
    init_accel: float = 0.1

    # Ingest
    max_missing_fraction: float = 0.1
    reorder_depth: int = 8
    queue_depth: int = 64

    def __init__(self, **data):
        try:
            super().__init__(**data)
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @field_validator("subcarrier_freqs")
    @classmethod
    def _check_subcarriers(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if len(value) < 2:
            raise ValueError("at least 2 subcarriers are required")
        if np.any(np.diff(np.asarray(value, dtype=float)) <= 0):
            raise ValueError("subcarrier_freqs must be strictly increasing")
        return value

    @field_validator("carrier_freq", "antenna_spacing", "sample_interval", "tx_range", "max_speed",
                     "fusion_window", "ekf_pos_std", "ekf_doppler_std", "assoc_gate")
    @classmethod
    def _check_positive(cls, value: float) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError("must be a positive finite number")
        return value

    @field_validator("num_antennas", "cpi_stride", "confirm_age", "delete_misses", "reorder_depth", "queue_depth")
    @classmethod
    def _check_count(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("cpi_len", "fft_bins_delay", "fft_bins_aoa", "fft_bins_doppler", "md_window_len", "md_fft_len")
    @classmethod
    def _check_bins(cls, value: int) -> int:
        if value < 2:
            raise ValueError("must be at least 2")
        return value

    @field_validator("tx_aoa")
    @classmethod
    def _check_tx_aoa(cls, value: float) -> float:
        if not abs(value) < math.pi / 2:
            raise ValueError("|tx_aoa| must be below pi/2")
        return value

    @field_validator("confirm_visibility", "max_missing_fraction")
    @classmethod
    def _check_fraction(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("must lie in [0, 1]")
        return value

    @model_validator(mode="after")
    def _check_consistency(self) -> "SystemConfig":
        if self.num_antennas > 1 and self.fft_bins_aoa < self.num_antennas:
            raise ValueError("fft_bins_aoa must not be smaller than num_antennas")
        if self.fft_bins_doppler < self.cpi_len:
            raise ValueError("fft_bins_doppler must not be smaller than cpi_len")
        if self.fft_bins_delay < self.regridded_len:
            raise ValueError("fft_bins_delay must cover the regridded subcarrier count")
        if self.md_fft_len < self.md_window_len:
            raise ValueError("md_fft_len must not be smaller than md_window_len")
        return self

    @computed_field
    @property
    def tx_delay(self) -> float:
        return self.tx_range / SPEED_OF_LIGHT

    @computed_field
    @property
    def md_sample_interval(self) -> float:
        return self.cpi_stride * self.sample_interval

    @property
    def num_subcarriers(self) -> int:
        return len(self.subcarrier_freqs)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def tx_position(self) -> np.ndarray:
        return np.array([self.tx_range * math.sin(self.tx_aoa), self.tx_range * math.cos(self.tx_aoa)])

    @property
    def freqs(self) -> np.ndarray:
        return np.asarray(self.subcarrier_freqs, dtype=float)

    @property
    def is_uniform_grid(self) -> bool:
        steps = np.diff(self.freqs)
        return bool(np.allclose(steps, steps[0], rtol=1e-9, atol=0.0))

    @property
    def effective_spacing(self) -> float:
        """Uniform subcarrier spacing used by the delay transform (smallest native step)"""
        return float(np.min(np.diff(self.freqs)))

    @property
    def regridded_len(self) -> int:
        """Number of subcarriers after regridding onto the uniform grid"""
        if self.is_uniform_grid:
            return self.num_subcarriers
        span = self.freqs[-1] - self.freqs[0]
        return int(round(span / self.effective_spacing)) + 1

    def with_overrides(self, **overrides) -> "SystemConfig":
        """Return a validated copy with some fields replaced"""
        values = self.model_dump(exclude=COMPUTED_FIELDS)
        values.update(overrides)
        return SystemConfig(**values)


@dataclass
class CpiCube:
    """One coherent processing interval of complex CSI, subcarriers x antennas x time"""
    data: np.ndarray
    start_time: float
    seq: int
    filled: int = 0  # samples repeated to cover ingest gaps

    def validate(self, cfg: SystemConfig) -> None:
        expected = (cfg.num_subcarriers, cfg.num_antennas, cfg.cpi_len)
        if self.data.shape != expected:
            raise ConfigError(f"CPI shape {self.data.shape} does not match configured {expected}")
        if not np.all(np.isfinite(self.data)):
            raise CsiFormatError(f"CPI {self.seq} contains non-finite CSI")


@dataclass
class FeatureTensor:
    """Delay x AoA x Doppler complex tensor with physical axes"""
    data: np.ndarray
    delay_axis: np.ndarray
    aoa_axis: np.ndarray
    doppler_axis: np.ndarray
    start_time: float = 0.0

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape


@dataclass
class Detection:
    """Per-CPI target parameters; valid is False for a NoTarget outcome"""
    delay: float = 0.0
    aoa: float = 0.0
    doppler: float = 0.0
    snr: float = float("-inf")
    time: float = 0.0
    valid: bool = False
    peak_index: Optional[Tuple[int, int, int]] = None
    peak_value: complex = 0j

    @classmethod
    def no_target(cls, time: float, snr: float = float("-inf")) -> "Detection":
        return cls(time=time, snr=snr, valid=False)


@dataclass
class RunSummary:
    """Counters reported at the end of a pipeline run"""
    cpis: int = 0
    detections: int = 0
    fused: int = 0
    skipped: int = 0
    dropped_measurements: int = 0
    outliers_removed: int = 0
    confirmed_tracks: int = 0
    errors: list = field(default_factory=list)
