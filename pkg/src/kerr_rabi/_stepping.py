"""Time-grid bookkeeping shared by the full and effective propagators."""

from __future__ import annotations

import math

import numpy as np

HOLDS = ("linear", "constant")


def default_stride(n_steps: int) -> int:
    """Record every 1000 steps, or finer so that at least 2000 points are kept."""
    return max(1, min(1000, n_steps // 2000))


def record_indices(n_steps: int, stride: int) -> np.ndarray:
    idx = np.arange(0, n_steps + 1, stride)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return idx


def substeps(dt: float, hold: str, max_substep: float) -> int:
    if hold not in HOLDS:
        raise ValueError(f"hold must be one of {HOLDS}, got {hold!r}")
    if hold == "constant":
        return 1
    return max(1, math.ceil(dt / max_substep - 1e-12))


def as_batch(path, n_steps: int) -> np.ndarray | None:
    """Promote a path (or stack of paths) to shape (batch, n_steps + 1)."""
    if path is None:
        return None
    values = np.asarray(getattr(path, "values", path), dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    if values.shape[-1] != n_steps + 1:
        raise ValueError(f"path has {values.shape[-1]} samples, schedule needs {n_steps + 1}")
    return values


def sample_within_step(path: np.ndarray | None, k: int, n_sub: int, hold: str):
    """Noise values at the substep midpoints of step k (list of arrays or Nones)."""
    if path is None:
        return [None] * n_sub
    left = path[:, k]
    if hold == "constant":
        return [left] * n_sub
    slope = path[:, k + 1] - left
    return [left + slope * ((s + 0.5) / n_sub) for s in range(n_sub)]
