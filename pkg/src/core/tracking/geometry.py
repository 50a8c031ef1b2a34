"""
Bistatic measurement to Cartesian position
"""

import math
from typing import Tuple

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from src.core.exceptions import DegenerateGeometry
from src.core.models import SystemConfig


def bistatic_range(path_length: float, aoa: float, cfg: SystemConfig) -> float:
    """
    Receiver-to-target distance on the bistatic ellipse along the AoA ray

    r = (d_x^2 - d_s^2) / (2 [d_x - d_s cos(theta_x - theta_s)])
    """
    d_s = cfg.tx_range
    if not path_length > d_s:
        raise DegenerateGeometry(f"Path length {path_length:.3f} m does not exceed the baseline {d_s:.3f} m")
    denominator = 2.0 * (path_length - d_s * math.cos(aoa - cfg.tx_aoa))
    if not denominator > 0:
        raise DegenerateGeometry("Bistatic range denominator is not positive")
    return (path_length ** 2 - d_s ** 2) / denominator


def bistatic_to_cartesian(measurement, cfg: SystemConfig) -> Tuple[float, float]:
    """
    Position of a fused measurement (absolute delay in s, AoA in rad)

    Args:
        measurement: Object with delay and aoa attributes
        cfg: System configuration

    Returns:
        (x, y) in metres, x = r sin(aoa), y = r cos(aoa)
    """
    r = bistatic_range(measurement.delay * SPEED_OF_LIGHT, measurement.aoa, cfg)
    return r * math.sin(measurement.aoa), r * math.cos(measurement.aoa)


def path_length(position: np.ndarray, cfg: SystemConfig) -> float:
    """Tx -> position -> Rx distance"""
    return float(np.linalg.norm(position - cfg.tx_position) + np.linalg.norm(position))
