"""
Track management: nearest-neighbour association, birth, confirmation, deletion
"""

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from src.core.conversions import doppler_bin_to_velocity
from src.core.exceptions import DegenerateGeometry, NumericalFailure
from src.core.models import SystemConfig
from src.core.tracking.ekf import Track, ekf_predict, ekf_update
from src.core.tracking.geometry import bistatic_to_cartesian

# Initial velocity/acceleration variances of a new track
_BIRTH_VEL_VAR = 1.0
_BIRTH_ACC_VAR = 1.0

TRACK_COLUMNS = ["time", "track_id", "confirmed", "x", "y", "vx", "vy", "ax", "ay", "assoc_flag"]


@dataclass
class PositionMeasurement:
    """Measurement already expressed as z = [x, y, closing speed]"""
    z: np.ndarray
    time: float


def measurement_vector(measurement, cfg: SystemConfig) -> np.ndarray:
    """[x, y, closing speed] of a fused measurement"""
    x, y = bistatic_to_cartesian(measurement, cfg)
    return np.array([x, y, float(doppler_bin_to_velocity(measurement.doppler, cfg))])


def spawn_track(z: np.ndarray, time: float, track_id: int, cfg: SystemConfig) -> Track:
    """New tentative track at the measured position, half the Doppler speed along the bearing"""
    position = np.asarray(z[:2], dtype=float)
    bearing = position / np.linalg.norm(position)
    velocity = -0.5 * z[2] * bearing
    state = np.concatenate([position, velocity, [cfg.init_accel, cfg.init_accel]])
    cov = np.diag([cfg.ekf_pos_std ** 2, cfg.ekf_pos_std ** 2,
                   _BIRTH_VEL_VAR, _BIRTH_VEL_VAR, _BIRTH_ACC_VAR, _BIRTH_ACC_VAR])
    return Track(state=state, cov=cov, track_id=track_id, last_update=time)


def associate_and_manage(tracks: List[Track], z: Optional[np.ndarray], time: float, cfg: SystemConfig,
                         next_id: int = 1) -> Tuple[List[Track], Optional[int], int]:
    """
    One tracking frame

    Args:
        tracks: Live tracks (not modified)
        z: Measurement [x, y, closing speed] or None for a frame without one
        time: Frame time in seconds
        cfg: System configuration
        next_id: Identifier for a track born in this frame

    Returns:
        (surviving tracks, id of the associated or newborn track, next free id)
    """
    predicted: List[Track] = []
    for track in tracks:
        dt = time - track.last_update
        if dt > 0:
            track = ekf_predict(track, dt, cfg.ekf_jerk_psd)
        predicted.append(replace(track, last_update=time, age=track.age + 1))

    associated: Optional[int] = None
    if z is not None and predicted:
        distances = [np.linalg.norm(t.position - z[:2]) for t in predicted]
        best = int(np.argmin(distances))
        if distances[best] <= cfg.assoc_gate:
            associated = best

    survivors: List[Track] = []
    assoc_id: Optional[int] = None
    for i, track in enumerate(predicted):
        if i == associated:
            try:
                track = ekf_update(track, z, cfg)
                track = replace(track, hits=track.hits + 1, consecutive_misses=0)
                assoc_id = track.track_id
            except NumericalFailure as e:
                logger.warning(f"Track {track.track_id}: update skipped ({e})")
                track = replace(track, consecutive_misses=track.consecutive_misses + 1)
        else:
            track = replace(track, consecutive_misses=track.consecutive_misses + 1)

        if track.consecutive_misses >= cfg.delete_misses:
            logger.info(f"Track {track.track_id} deleted after {track.consecutive_misses} misses at {time:.3f} s")
            continue
        if not track.confirmed and track.age > cfg.confirm_age:
            if track.visibility > cfg.confirm_visibility and track.consecutive_misses < cfg.confirm_max_misses:
                track = replace(track, confirmed=True)
                logger.info(f"Track {track.track_id} confirmed at {time:.3f} s (visibility {track.visibility:.2f})")
            else:
                logger.debug(f"Tentative track {track.track_id} dropped (visibility {track.visibility:.2f})")
                continue
        survivors.append(track)

    if z is not None and associated is None:
        newborn = spawn_track(z, time, next_id, cfg)
        logger.debug(f"Track {next_id} born at ({z[0]:.2f}, {z[1]:.2f}) m")
        survivors.append(newborn)
        assoc_id = next_id
        next_id += 1

    return survivors, assoc_id, next_id


class Tracker:
    """Owns the live tracks, the id counter and the per-frame history"""

    def __init__(self, cfg: SystemConfig):
        self.cfg = cfg
        self.tracks: List[Track] = []
        self.next_id = 1
        self.rows: List[Dict] = []
        self.deleted: List[int] = []
        self.dropped_measurements = 0
        self.ever_confirmed: set = set()

    def step(self, measurement=None, time: Optional[float] = None) -> List[Track]:
        """
        Advance one frame with a fused measurement (or None)

        The measurement may be a FusedMeasurement (converted through the
        bistatic geometry) or a PositionMeasurement.
        """
        z = None
        if isinstance(measurement, PositionMeasurement):
            z = np.asarray(measurement.z, dtype=float)
            time = measurement.time if time is None else time
        elif measurement is not None:
            time = measurement.window_end_time if time is None else time
            try:
                z = measurement_vector(measurement, self.cfg)
            except DegenerateGeometry as e:
                self.dropped_measurements += 1
                logger.warning(f"Measurement at {time:.3f} s dropped: {e}")
        if time is None:
            raise ValueError("Frame time is required when no measurement is given")

        before = {t.track_id for t in self.tracks}
        self.tracks, assoc_id, self.next_id = associate_and_manage(self.tracks, z, time, self.cfg, self.next_id)
        after = {t.track_id for t in self.tracks}
        self.deleted.extend(sorted(before - after))

        for track in self.tracks:
            if track.confirmed:
                self.ever_confirmed.add(track.track_id)
            x, y, vx, vy, ax, ay = track.state
            self.rows.append({
                "time": time,
                "track_id": track.track_id,
                "confirmed": int(track.confirmed),
                "x": x, "y": y, "vx": vx, "vy": vy, "ax": ax, "ay": ay,
                "assoc_flag": int(track.track_id == assoc_id),
            })
        return self.tracks

    @property
    def confirmed_tracks(self) -> List[Track]:
        return [t for t in self.tracks if t.confirmed]
