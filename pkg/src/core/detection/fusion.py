"""
Sliding-window fusion of per-CPI detections

Outliers are removed with a Z-score test in every parameter dimension,
the survivors are averaged with their SNR (dB) as weights.
"""

from collections import deque
from dataclasses import dataclass
from typing import Deque, Optional, Sequence, Set, Tuple

import numpy as np
from loguru import logger

from src.core.exceptions import InsufficientData
from src.core.models import Detection, SystemConfig

# dB weights are floored so that every surviving estimate counts
MIN_WEIGHT_DB = 1.0


@dataclass
class FusedMeasurement:
    """Window-fused target parameters"""
    delay: float
    aoa: float
    doppler: float
    snr: float
    window_end_time: float
    n_used: int
    n_outliers: int = 0


def zscore_filter(values: Sequence[float], threshold: float) -> np.ndarray:
    """
    Indices of the values whose |z| does not exceed threshold

    Population mean and standard deviation are used; zero spread keeps
    everything.
    """
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise InsufficientData("zscore_filter needs at least one value")

    sigma = data.std()
    if sigma == 0 or not np.isfinite(sigma):
        return np.arange(data.size)
    z = np.abs(data - data.mean()) / sigma
    return np.flatnonzero(z <= threshold)


def weighted_fuse(detections: Sequence[Detection], cfg: SystemConfig) -> Optional[FusedMeasurement]:
    """
    Fuse the valid detections of one window

    An estimate flagged in any of delay, AoA, Doppler or SNR is dropped
    entirely. Returns None when nothing survives.
    """
    dets = [d for d in detections if d.valid]
    if not dets:
        return None
    return _fuse_survivors(dets, zscore_keep_mask(dets, cfg.zscore_threshold))


def zscore_keep_mask(detections: Sequence[Detection], threshold: float) -> np.ndarray:
    """
    Boolean mask over detections, False where any of delay, AoA, Doppler
    or SNR fails the Z-score test
    """
    params = np.array([[d.delay, d.aoa, d.doppler, d.snr] for d in detections], dtype=float)
    keep = np.ones(len(detections), dtype=bool)
    for column in range(params.shape[1]):
        mask = np.zeros(len(detections), dtype=bool)
        mask[zscore_filter(params[:, column], threshold)] = True
        keep &= mask
    return keep


def _fuse_survivors(dets: Sequence[Detection], keep: np.ndarray) -> Optional[FusedMeasurement]:
    params = np.array([[d.delay, d.aoa, d.doppler, d.snr] for d in dets], dtype=float)
    survivors = params[keep]
    if len(survivors) == 0:
        return None

    weights = np.maximum(survivors[:, 3], MIN_WEIGHT_DB)
    fused = weights @ survivors[:, :3] / weights.sum()
    return FusedMeasurement(
        delay=float(fused[0]),
        aoa=float(fused[1]),
        doppler=float(fused[2]),
        snr=float(survivors[:, 3].mean()),
        window_end_time=float(max(d.time for d in dets)),
        n_used=int(keep.sum()),
        n_outliers=int(len(dets) - keep.sum()),
    )


class SlidingFusion:
    """
    Ring buffer of recent detections, fused on every push

    Every push gets a slot number. A detection rejected by the Z-score test
    in any window it belongs to is recorded once in rejected.
    """

    def __init__(self, cfg: SystemConfig):
        self.cfg = cfg
        self.window: Deque[Tuple[int, Detection]] = deque()
        self.rejected: Set[int] = set()
        self.pushed = 0
        self.last_time: Optional[float] = None

    @property
    def outliers_removed(self) -> int:
        return len(self.rejected)

    def push(self, detection: Detection) -> Optional[FusedMeasurement]:
        """
        Add one CPI outcome and fuse the window ending at its time

        Args:
            detection: Detection of the newest CPI (valid or NoTarget)

        Returns:
            FusedMeasurement, or None if the window holds no usable estimate
        """
        slot = self.pushed
        self.pushed += 1
        now = detection.time
        if self.last_time is not None and now < self.last_time:
            logger.warning(f"Detection at {now:.3f} s arrived after {self.last_time:.3f} s, ignored")
            return None
        self.last_time = now

        if detection.valid:
            self.window.append((slot, detection))
        while self.window and self.window[0][1].time <= now - self.cfg.fusion_window:
            self.window.popleft()
        if not self.window:
            return None

        slots = [s for s, _ in self.window]
        dets = [d for _, d in self.window]
        keep = zscore_keep_mask(dets, self.cfg.zscore_threshold)
        if not keep.all():
            dropped = {s for s, kept in zip(slots, keep) if not kept}
            logger.debug(f"Fusion at {now:.3f} s dropped {len(dropped)} of {len(dets)} estimates")
            self.rejected |= dropped

        fused = _fuse_survivors(dets, keep)
        if fused is None:
            return None
        fused.window_end_time = now
        return fused

    def reset(self) -> None:
        self.window.clear()
        self.last_time = None

    @property
    def size(self) -> int:
        return len(self.window)
