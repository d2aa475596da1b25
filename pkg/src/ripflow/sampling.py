"""Bilinear sampling of 2-D grids at fractional (x, y) positions."""

from __future__ import annotations

import numpy as np


def bilinear_sample(grid: np.ndarray, x, y, mode: str = "clamp") -> np.ndarray:
    """Sample grid[y, x] bilinearly; x and y may be arrays.

    mode "clamp" pins out-of-bounds coordinates to the border, mode
    "wrap" treats the grid as periodic in both axes.
    """
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    if mode == "clamp":
        x = np.clip(x, 0.0, w - 1.0)
        y = np.clip(y, 0.0, h - 1.0)
        x0 = np.floor(x).astype(np.int64)
        y0 = np.floor(y).astype(np.int64)
        fx = x - x0
        fy = y - y0
        x1 = np.minimum(x0 + 1, w - 1)
        y1 = np.minimum(y0 + 1, h - 1)
    elif mode == "wrap":
        x0f = np.floor(x)
        y0f = np.floor(y)
        fx = x - x0f
        fy = y - y0f
        x0 = x0f.astype(np.int64) % w
        y0 = y0f.astype(np.int64) % h
        x1 = (x0 + 1) % w
        y1 = (y0 + 1) % h
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")

    top = grid[y0, x0] * (1.0 - fx) + grid[y0, x1] * fx
    bot = grid[y1, x0] * (1.0 - fx) + grid[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy
