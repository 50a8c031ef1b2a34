"""
Result files: tracks and fused-measurement CSVs, spectrogram binary/graymap
"""

from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy.constants import c as SPEED_OF_LIGHT

from src.analysis.microdoppler import Spectrogram
from src.core.detection.fusion import FusedMeasurement
from src.core.tracking.tracker import TRACK_COLUMNS

FUSED_COLUMNS = ["time", "delay_s", "path_length_m", "aoa_rad", "aoa_deg", "doppler_hz", "snr_db", "n_used"]
FLOAT_FORMAT = "%.10g"


def write_tracks_csv(path: Union[str, Path], rows: Sequence[Dict]) -> Path:
    """Track history, one row per live track and frame"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(list(rows), columns=TRACK_COLUMNS)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(df)} track rows to {path}")
    return path


def write_fused_csv(path: Union[str, Path], fused: Sequence[FusedMeasurement]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(
        [
            {
                "time": m.window_end_time,
                "delay_s": m.delay,
                "path_length_m": m.delay * SPEED_OF_LIGHT,
                "aoa_rad": m.aoa,
                "aoa_deg": np.degrees(m.aoa),
                "doppler_hz": m.doppler,
                "snr_db": m.snr,
                "n_used": m.n_used,
            }
            for m in fused
        ],
        columns=FUSED_COLUMNS,
    )
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(df)} fused measurements to {path}")
    return path


def write_spectrogram(stem: Union[str, Path], spectrogram: Spectrogram) -> List[Path]:
    """
    Write <stem>.f32 (float32 row-major, windows x Doppler bins),
    <stem>.txt (axes) and <stem>.pgm (8-bit graymap, time left to right,
    positive Doppler at the top)

    Returns:
        The three paths
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    matrix = np.ascontiguousarray(spectrogram.matrix, dtype="<f4")
    n_rows, n_cols = matrix.shape

    binary = stem.with_suffix(".f32")
    binary.write_bytes(matrix.tobytes())

    sidecar = stem.with_suffix(".txt")
    lines = [
        f"rows = {n_rows}",
        f"cols = {n_cols}",
        "dtype = float32 little-endian, row-major (row = time window, col = Doppler bin)",
        f"time_axis_s = {','.join(f'{t:.6f}' for t in spectrogram.time_axis)}",
        f"doppler_axis_hz = {','.join(f'{f:.6f}' for f in spectrogram.doppler_axis)}",
    ]
    sidecar.write_text("\n".join(lines) + "\n")

    graymap = stem.with_suffix(".pgm")
    image = np.clip(np.rint(matrix.T[::-1] * 255.0), 0, 255).astype(np.uint8)
    with open(graymap, "wb") as fh:
        fh.write(f"P5\n{n_rows} {n_cols}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image).tobytes())

    logger.info(f"Wrote spectrogram {n_rows}x{n_cols} to {binary}")
    return [binary, sidecar, graymap]


def read_spectrogram(stem: Union[str, Path]) -> np.ndarray:
    """Matrix stored by write_spectrogram"""
    stem = Path(stem)
    meta = {}
    for line in stem.with_suffix(".txt").read_text().splitlines():
        key, _, value = line.partition(" = ")
        meta[key] = value
    rows, cols = int(meta["rows"]), int(meta["cols"])
    return np.frombuffer(stem.with_suffix(".f32").read_bytes(), dtype="<f4").reshape(rows, cols)


def write_spectrogram_png(path: Union[str, Path], spectrogram: Spectrogram) -> Path:
    from src.utils.plotting import plot_spectrogram

    return plot_spectrogram(path, spectrogram.matrix, spectrogram.time_axis, spectrogram.doppler_axis)
