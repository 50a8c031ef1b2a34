"""
System presets and the key = value configuration file
"""

import math
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from dotenv import dotenv_values
from loguru import logger
from scipy.constants import c as SPEED_OF_LIGHT

from src.core.exceptions import ConfigError
from src.core.models import COMPUTED_FIELDS, SystemConfig

# Intel 5300 grouped subcarrier indices for a 20 MHz channel
INTEL5300_SUBCARRIERS = list(range(-28, -1, 2)) + [-1, 1] + list(range(3, 28, 2)) + [28]

DEFAULT_TX_RANGE = 4.0
DEFAULT_TX_AOA = -math.pi / 6


def lte_preset(carrier_freq: float = 3.1e9, **overrides) -> SystemConfig:
    """LTE downlink: 100 subcarriers at 180 kHz, 3 antennas at half wavelength"""
    freqs = carrier_freq + (np.arange(100) - 49.5) * 180e3
    values = dict(
        carrier_freq=carrier_freq,
        subcarrier_freqs=tuple(freqs.tolist()),
        num_antennas=3,
        antenna_spacing=SPEED_OF_LIGHT / (2 * carrier_freq),
        tx_range=DEFAULT_TX_RANGE,
        tx_aoa=DEFAULT_TX_AOA,
    )
    values.update(overrides)
    return SystemConfig(**values)


def wifi5300_preset(carrier_freq: float = 5.32e9, **overrides) -> SystemConfig:
    """WiFi (channel 64 by default) as reported by the Intel 5300: 30 grouped subcarriers"""
    freqs = carrier_freq + np.asarray(INTEL5300_SUBCARRIERS, dtype=float) * 312.5e3
    values = dict(
        carrier_freq=carrier_freq,
        subcarrier_freqs=tuple(freqs.tolist()),
        num_antennas=3,
        antenna_spacing=SPEED_OF_LIGHT / (2 * carrier_freq),
        tx_range=DEFAULT_TX_RANGE,
        tx_aoa=DEFAULT_TX_AOA,
    )
    values.update(overrides)
    return SystemConfig(**values)


PRESETS = {
    "lte": lte_preset,
    "wifi5300": wifi5300_preset,
}


def _parse_values(raw: Dict[str, Optional[str]]) -> Dict[str, object]:
    values: Dict[str, object] = {}
    for key, text in raw.items():
        if text is None or text.strip() == "":
            raise ConfigError(f"Missing value for '{key}'")
        text = text.strip()
        if key == "subcarrier_freqs":
            try:
                values[key] = tuple(float(item) for item in text.split(",") if item.strip())
            except ValueError as e:
                raise ConfigError(f"Bad subcarrier list: {e}") from e
        elif key.endswith("_deg"):
            try:
                values[key[:-4]] = math.radians(float(text))
            except ValueError as e:
                raise ConfigError(f"Bad angle for '{key}': {text}") from e
        else:
            values[key] = text
    return values


def config_from_mapping(raw: Dict[str, Optional[str]]) -> SystemConfig:
    """Build a SystemConfig from string values (as read from a config file)"""
    values = _parse_values(dict(raw))
    preset_name = str(values.pop("preset", "lte")).lower()
    if preset_name not in PRESETS:
        raise ConfigError(f"Unknown preset '{preset_name}' (expected one of {sorted(PRESETS)})")

    if "carrier_freq" in values:
        try:
            values["carrier_freq"] = float(values["carrier_freq"])
        except ValueError as e:
            raise ConfigError(f"Bad carrier_freq: {e}") from e

    num_sub = values.pop("num_subcarriers", None)
    spacing = values.pop("subcarrier_spacing", None)
    if (num_sub is None) != (spacing is None):
        raise ConfigError("num_subcarriers and subcarrier_spacing must be given together")
    if num_sub is not None:
        if "subcarrier_freqs" in values:
            raise ConfigError("Give either subcarrier_freqs or num_subcarriers/subcarrier_spacing, not both")
        try:
            n = int(num_sub)
            step = float(spacing)
        except ValueError as e:
            raise ConfigError(f"Bad subcarrier grid: {e}") from e
        carrier = values.get("carrier_freq", PRESETS[preset_name]().carrier_freq)
        values["subcarrier_freqs"] = tuple((carrier + (np.arange(n) - (n - 1) / 2) * step).tolist())

    for key in COMPUTED_FIELDS & values.keys():
        logger.warning(f"Ignoring derived key '{key}' in configuration")
        values.pop(key)

    return PRESETS[preset_name](**values)


def load_config(path: Optional[Union[str, Path]] = None) -> SystemConfig:
    """
    Load a SystemConfig from a key = value file

    Args:
        path: Config file; None returns the LTE defaults

    Returns:
        Validated SystemConfig
    """
    if path is None:
        return lte_preset()

    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")

    cfg = config_from_mapping(dotenv_values(path))
    logger.info(f"Loaded config {path}: {cfg.num_subcarriers}x{cfg.num_antennas}x{cfg.cpi_len} at {cfg.carrier_freq / 1e9:.3f} GHz")
    return cfg


# Unit of every config field, written as a comment above its line
FIELD_UNITS: Dict[str, str] = {
    "carrier_freq": "Hz",
    "subcarrier_freqs": "Hz, comma separated",
    "num_antennas": "count",
    "antenna_spacing": "m",
    "sample_interval": "s",
    "cpi_len": "samples",
    "fft_bins_delay": "bins",
    "fft_bins_aoa": "bins",
    "fft_bins_doppler": "bins",
    "cpi_stride": "samples",
    "doppler_window": "rect or hann",
    "tx_range": "m",
    "tx_aoa": "rad",
    "max_speed": "m/s",
    "snr_threshold": "dB",
    "zscore_threshold": "standard deviations",
    "fusion_window": "s",
    "md_window_len": "CPIs",
    "md_fft_len": "bins",
    "ekf_jerk_psd": "m^2/s^5",
    "ekf_pos_std": "m",
    "ekf_doppler_std": "m/s",
    "assoc_gate": "m",
    "confirm_age": "frames",
    "confirm_visibility": "hits per frame",
    "confirm_max_misses": "frames",
    "delete_misses": "frames",
    "init_accel": "m/s^2",
    "max_missing_fraction": "fraction of a CPI",
    "reorder_depth": "datagrams",
    "queue_depth": "CPIs",
}


def config_to_text(cfg: SystemConfig) -> str:
    """Serialize a config so that load_config reproduces it exactly"""
    lines = ["# csitrack system configuration", "preset = lte"]
    for key, value in cfg.model_dump(exclude=COMPUTED_FIELDS).items():
        lines.append(f"# {key} [{FIELD_UNITS.get(key, 'unitless')}]")
        if key == "subcarrier_freqs":
            lines.append(f"subcarrier_freqs = {','.join(repr(float(f)) for f in value)}")
        elif key == "tx_aoa":
            lines.append(f"# tx_aoa_deg = {math.degrees(value):.6f}")
            lines.append(f"tx_aoa = {value!r}")
        else:
            lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    return "\n".join(lines) + "\n"
