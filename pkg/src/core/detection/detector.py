"""
Per-CPI target detection: subcube SNR against the global noise floor
"""

from typing import Tuple, Union

import numpy as np
from loguru import logger

from src.core.exceptions import EmptyTensor
from src.core.features.cascaded_fft import find_global_peak
from src.core.models import Detection, FeatureTensor, SystemConfig

# Half-width of the subcube around the peak (3 x 3 x 3 bins)
SUBCUBE_HALF_WIDTH = 1


def subcube_snr(tensor: Union[FeatureTensor, np.ndarray], peak_idx: Tuple[int, int, int]) -> float:
    """
    Mean power of the 3x3x3 neighbourhood over the mean power of the tensor

    The neighbourhood is clipped at the tensor edges. An all-zero tensor
    gives 0.

    Args:
        tensor: Feature tensor or its raw data
        peak_idx: (delay, aoa, doppler) bin indices

    Returns:
        Linear power ratio
    """
    data = tensor.data if isinstance(tensor, FeatureTensor) else np.asarray(tensor)
    power = data.real ** 2 + data.imag ** 2
    noise = power.mean()
    if noise <= 0:
        return 0.0

    window = tuple(
        slice(max(i - SUBCUBE_HALF_WIDTH, 0), min(i + SUBCUBE_HALF_WIDTH + 1, n))
        for i, n in zip(peak_idx, power.shape)
    )
    return float(power[window].mean() / noise)


def snr_to_db(snr: float) -> float:
    return float(10.0 * np.log10(snr)) if snr > 0 else float("-inf")


def detect(tensor: FeatureTensor, cfg: SystemConfig) -> Detection:
    """
    Global-peak detection for one CPI

    Returns a valid Detection (absolute delay, AoA, Doppler, SNR in dB)
    when the subcube SNR exceeds snr_threshold dB, otherwise a NoTarget
    Detection with valid unset.
    """
    try:
        peak = find_global_peak(tensor)
    except EmptyTensor:
        logger.debug(f"CPI at {tensor.start_time:.3f} s: empty tensor")
        return Detection.no_target(tensor.start_time)

    snr_db = snr_to_db(subcube_snr(tensor, peak.index))
    if not snr_db > cfg.snr_threshold:
        logger.debug(f"CPI at {tensor.start_time:.3f} s: no target (SNR {snr_db:.1f} dB)")
        return Detection.no_target(tensor.start_time, snr_db)

    logger.debug(
        f"CPI at {tensor.start_time:.3f} s: peak {peak.index} "
        f"delay={peak.delay * 1e9:.1f} ns aoa={np.degrees(peak.aoa):.1f} deg "
        f"doppler={peak.doppler:.2f} Hz SNR={snr_db:.1f} dB"
    )
    return Detection(
        delay=cfg.tx_delay + peak.delay,
        aoa=peak.aoa,
        doppler=peak.doppler,
        snr=snr_db,
        time=tensor.start_time,
        valid=True,
        peak_index=peak.index,
        peak_value=complex(tensor.data[peak.index]),
    )
