"""
Matplotlib renderings (Agg backend, files only)
"""

from pathlib import Path
from typing import Dict, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from loguru import logger  # noqa: E402


def plot_spectrogram(path: Union[str, Path], matrix: np.ndarray, time_axis: np.ndarray,
                     doppler_axis: np.ndarray, title: str = "Micro-Doppler signature") -> Path:
    """Doppler-time image of a normalized spectrogram"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(12, 6))
    mesh = ax.pcolormesh(time_axis, doppler_axis, matrix.T, shading="auto", cmap="jet", vmin=0.0, vmax=1.0)
    fig.colorbar(mesh, ax=ax, label="Normalized log magnitude")
    ax.set_xlabel("Time (s)")
    ax.set_ylabel("Doppler (Hz)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    logger.info(f"Saved spectrogram image {path}")
    return path


def plot_projections(path: Union[str, Path], projections: Dict[str, np.ndarray], axes: Dict[str, np.ndarray]) -> Path:
    """
    Three max-projections of a feature tensor side by side

    Args:
        path: Output PNG
        projections: delay_aoa, delay_doppler and aoa_doppler magnitude maps
        axes: delay (m of excess path), aoa (deg) and doppler (Hz) coordinates
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    layout = [
        ("delay_aoa", "aoa", "delay", "AoA (deg)", "Excess path (m)"),
        ("delay_doppler", "doppler", "delay", "Doppler (Hz)", "Excess path (m)"),
        ("aoa_doppler", "doppler", "aoa", "Doppler (Hz)", "AoA (deg)"),
    ]
    fig, subplots = plt.subplots(1, 3, figsize=(15, 5))
    for ax, (name, x_key, y_key, x_label, y_label) in zip(subplots, layout):
        image = 20 * np.log10(projections[name] + 1e-12)
        mesh = ax.pcolormesh(axes[x_key], axes[y_key], image, shading="auto", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="dB")
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        ax.set_title(name.replace("_", " / "))
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    logger.info(f"Saved tensor projections {path}")
    return path
