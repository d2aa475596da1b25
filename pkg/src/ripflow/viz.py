"""Rendering and Lagrangian diagnostics for velocity and likelihood grids.

All raster output is produced with Pillow draw calls on numpy buffers so
identical inputs give byte-identical images; nothing here depends on a
plotting backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from . import frame_io
from .detect import LikelihoodMatrix
from .errors import DimensionError, InputError
from .frame_io import Frame
from .optflow import VelocityField
from .sampling import bilinear_sample

LEGEND_WIDTH = 24
LEGEND_PAD = 4

ARROW_COLOR = (255, 48, 48)
DRIFTER_COLOR = (64, 224, 64)


@dataclass
class BlockMeans:
    """Block-averaged velocity grid; empty blocks have no valid pixels."""

    u: np.ndarray
    v: np.ndarray
    nonempty: np.ndarray
    block_w: int
    block_h: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape  # type: ignore[return-value]


def _block_reduce(a: np.ndarray, block_w: int, block_h: int) -> np.ndarray:
    h, w = a.shape
    rows = np.add.reduceat(a, np.arange(0, h, block_h), axis=0)
    return np.add.reduceat(rows, np.arange(0, w, block_w), axis=1)


def block_average(field: VelocityField, block_w: int, block_h: int) -> BlockMeans:
    """Mean vector of the valid pixels in each block.

    Trailing partial blocks average over their actual pixel count; blocks
    with no valid pixels are marked empty and carry a zero vector.
    """
    h, w = field.shape
    if block_w < 1 or block_h < 1:
        raise DimensionError("block dimensions must be >= 1")
    if block_w > w or block_h > h:
        raise DimensionError(f"block {block_w}x{block_h} exceeds frame {w}x{h}")
    weight = field.valid.astype(np.float64)
    n = _block_reduce(weight, block_w, block_h)
    usum = _block_reduce(field.u * weight, block_w, block_h)
    vsum = _block_reduce(field.v * weight, block_w, block_h)
    nonempty = n > 0
    safe = np.where(nonempty, n, 1.0)
    return BlockMeans(
        u=np.where(nonempty, usum / safe, 0.0),
        v=np.where(nonempty, vsum / safe, 0.0),
        nonempty=nonempty,
        block_w=block_w,
        block_h=block_h,
    )


def quiver_arrows(means: BlockMeans, scale: float) -> list[tuple[float, float, float, float]]:
    """Arrow segments (x0, y0, x1, y1), one per non-empty moving block.

    Arrows start at block centers; pixel length is scale times the block
    speed, capped at the block diagonal.
    """
    diag = math.hypot(means.block_w, means.block_h)
    arrows = []
    nby, nbx = means.shape
    for by in range(nby):
        for bx in range(nbx):
            if not means.nonempty[by, bx]:
                continue
            mu = means.u[by, bx]
            mv = means.v[by, bx]
            speed = math.hypot(mu, mv)
            if speed == 0:
                continue
            cx = (bx + 0.5) * means.block_w
            cy = (by + 0.5) * means.block_h
            length = min(scale * speed, diag)
            arrows.append((cx, cy, cx + length * mu / speed, cy + length * mv / speed))
    return arrows


def _to_rgb_image(frame) -> Image.Image:
    if isinstance(frame, Frame):
        gray = frame.gray
    else:
        gray = np.asarray(frame, dtype=np.float64)
    u8 = np.rint(np.clip(gray, 0.0, 1.0) * 255.0).astype(np.uint8)
    return Image.fromarray(np.stack([u8] * 3, axis=-1), mode="RGB")


def render_quiver(frame, means: BlockMeans, scale: float = 8.0) -> Image.Image:
    """Rasterize block arrows onto the frame; zero blocks draw nothing."""
    img = _to_rgb_image(frame)
    draw = ImageDraw.Draw(img)
    for x0, y0, x1, y1 in quiver_arrows(means, scale):
        draw.line([(x0, y0), (x1, y1)], fill=ARROW_COLOR, width=1)
        theta = math.atan2(y1 - y0, x1 - x0)
        head = min(4.0, 0.4 * math.hypot(x1 - x0, y1 - y0))
        for side in (theta + 5.0 * math.pi / 6.0, theta - 5.0 * math.pi / 6.0):
            draw.line(
                [(x1, y1), (x1 + head * math.cos(side), y1 + head * math.sin(side))],
                fill=ARROW_COLOR,
                width=1,
            )
    return img


def build_colormap(name: str = "hot") -> np.ndarray:
    """256x3 uint8 lookup table, monotone per channel."""
    t = np.linspace(0.0, 1.0, 256)
    if name == "hot":
        channels = [np.clip(3.0 * t, 0, 1), np.clip(3.0 * t - 1.0, 0, 1), np.clip(3.0 * t - 2.0, 0, 1)]
    elif name == "gray":
        channels = [t, t, t]
    else:
        raise InputError(f"unknown colormap {name!r}")
    return np.rint(np.stack(channels, axis=-1) * 255.0).astype(np.uint8)


def colormap_index(norm: np.ndarray) -> np.ndarray:
    """LUT index for normalized likelihood values in [0, 1]."""
    return np.rint(np.clip(norm, 0.0, 1.0) * 255.0).astype(np.int64)


def render_heatmap(
    likelihood: LikelihoodMatrix, colormap: str = "hot", legend: bool = True
) -> Image.Image:
    """Normalized likelihood through a fixed monotone colormap.

    legend=True appends a vertical colorbar strip (hot at top) to the
    right of the map.
    """
    if likelihood.t == 0:
        raise InputError("render_heatmap needs at least one fused field (T > 0)")
    lut = build_colormap(colormap)
    idx = colormap_index(likelihood.normalized())
    rgb = lut[idx]
    if legend:
        h = rgb.shape[0]
        rows = np.arange(h, dtype=np.float64)
        bar_idx = colormap_index(1.0 - rows / max(h - 1, 1))
        bar = np.repeat(lut[bar_idx][:, None, :], LEGEND_WIDTH - LEGEND_PAD, axis=1)
        pad = np.full((h, LEGEND_PAD, 3), 255, dtype=np.uint8)
        rgb = np.concatenate([rgb, pad, bar], axis=1)
    return Image.fromarray(rgb, mode="RGB")


def drifter_grid(region: tuple[float, float, float, float], grid: int = 20) -> np.ndarray:
    """Equally spaced grid x grid seed positions spanning the region
    (x0, y0, x1, y1) inclusive; defaults give 400 drifters."""
    x0, y0, x1, y1 = region
    if x1 < x0 or y1 < y0:
        raise InputError(f"degenerate drifter region {region}")
    xs = np.linspace(x0, x1, grid)
    ys = np.linspace(y0, y1, grid)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=-1)


def _sample_velocity(field: VelocityField, pos: np.ndarray) -> np.ndarray:
    u = bilinear_sample(field.u * field.valid, pos[:, 0], pos[:, 1], mode="clamp")
    v = bilinear_sample(field.v * field.valid, pos[:, 0], pos[:, 1], mode="clamp")
    return np.stack([u, v], axis=-1)


def simulate_drifters(
    flows: VelocityField | Sequence[VelocityField],
    region: tuple[float, float, float, float],
    grid: int = 20,
    dt: float = 1.0,
    steps: int = 100,
    integrator: str = "euler",
) -> np.ndarray:
    """Advect passive drifters through the velocity field(s).

    A bare VelocityField acts as a static field; a sequence is indexed by
    floor(elapsed frames) and must cover steps*dt. Velocities are sampled
    bilinearly (invalid pixels contribute zero) and positions are clamped
    to the frame. Returns positions with shape (steps + 1, n, 2),
    including the seed positions. integrator is "euler" or "rk2".
    """
    static = isinstance(flows, VelocityField)
    if static:
        series: Sequence[VelocityField] = [flows]
    else:
        series = list(flows)
        if not series:
            raise InputError("simulate_drifters: empty flow series")
        last_index = int(math.floor((steps - 1) * dt + (0.5 * dt if integrator == "rk2" else 0)))
        if last_index >= len(series):
            raise InputError(
                f"flow series of length {len(series)} does not cover {steps} steps of dt={dt}"
            )
    if integrator not in ("euler", "rk2"):
        raise InputError(f"unknown integrator {integrator!r}")
    if dt <= 0 or steps < 1:
        raise InputError("simulate_drifters needs dt > 0 and steps >= 1")

    h, w = series[0].shape
    x0, y0, x1, y1 = region
    if x0 < 0 or y0 < 0 or x1 > w - 1 or y1 > h - 1:
        raise InputError(f"drifter region {region} exceeds frame bounds {w}x{h}")

    def field_at(time: float) -> VelocityField:
        if static:
            return series[0]
        return series[int(math.floor(time))]

    pos = drifter_grid(region, grid)
    traj = np.empty((steps + 1, pos.shape[0], 2))
    traj[0] = pos
    for k in range(steps):
        t_now = k * dt
        if integrator == "euler":
            vel = _sample_velocity(field_at(t_now), pos)
        else:
            k1 = _sample_velocity(field_at(t_now), pos)
            mid = pos + 0.5 * dt * k1
            mid[:, 0] = np.clip(mid[:, 0], 0.0, w - 1.0)
            mid[:, 1] = np.clip(mid[:, 1], 0.0, h - 1.0)
            vel = _sample_velocity(field_at(t_now + 0.5 * dt), mid)
        pos = pos + vel * dt
        pos[:, 0] = np.clip(pos[:, 0], 0.0, w - 1.0)
        pos[:, 1] = np.clip(pos[:, 1], 0.0, h - 1.0)
        traj[k + 1] = pos
    return traj


def render_drifters(frame, positions: np.ndarray, radius: float = 2.0) -> Image.Image:
    """Mark drifter positions on the frame as filled dots."""
    img = _to_rgb_image(frame)
    draw = ImageDraw.Draw(img)
    for x, y in np.asarray(positions, dtype=np.float64):
        draw.ellipse([x - radius, y - radius, x + radius, y + radius], fill=DRIFTER_COLOR)
    return img


def write_trajectories_csv(path: str | Path, traj: np.ndarray) -> None:
    """Rows (drifter_id, step, x, y) for a (steps+1, n, 2) trajectory array."""
    rows = []
    for step in range(traj.shape[0]):
        for did in range(traj.shape[1]):
            rows.append((did, step, traj[step, did, 0], traj[step, did, 1]))
    frame_io.write_points_csv(path, ["drifter_id", "step", "x", "y"], rows)
