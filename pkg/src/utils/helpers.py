"""
Utility functions for the CSI power tracker
"""

from typing import Dict, Sequence

import numpy as np


def relative_frobenius_error(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b||_F / ||b||_F (absolute error when b is zero)"""
    reference = np.linalg.norm(b)
    diff = np.linalg.norm(a - b)
    return float(diff / reference) if reference > 0 else float(diff)


def latency_summary(durations_s: Sequence[float]) -> Dict[str, float]:
    """Mean/p50/p98/max of per-item durations, in milliseconds"""
    if len(durations_s) == 0:
        return {"count": 0, "mean_ms": 0.0, "p50_ms": 0.0, "p98_ms": 0.0, "max_ms": 0.0}
    ms = np.asarray(durations_s, dtype=float) * 1e3
    return {
        "count": len(ms),
        "mean_ms": float(ms.mean()),
        "p50_ms": float(np.percentile(ms, 50)),
        "p98_ms": float(np.percentile(ms, 98)),
        "max_ms": float(ms.max()),
    }


def latency_histogram(durations_s: Sequence[float], bins: int = 10) -> Dict[str, np.ndarray]:
    """Histogram of per-item durations in milliseconds"""
    counts, edges = np.histogram(np.asarray(durations_s, dtype=float) * 1e3, bins=bins)
    return {"counts": counts, "edges_ms": edges}


