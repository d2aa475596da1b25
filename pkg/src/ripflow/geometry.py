"""Coastline/skyline detection and the per-pixel offshore direction field.

The offshore field O tells the detector which way "away from the beach"
points at every sea pixel. Local directions follow the gradient of the
shoreline distance matrix; when a skyline is visible, global directions
toward its one-point-perspective focal point are blended in with a
distance-squared weight.

Coordinates follow the package convention: (x, y) = (column, row) with y
growing downward, grids indexed grid[y, x].
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import frame_io
from .errors import DimensionError, InputError, NoCoastlineError
from .frame_io import BinaryMask

CANNY_GAUSS_SIGMA = 2.0
CANNY_LO = 0.1
CANNY_HI = 0.3

# Pixels whose distance-matrix gradient is shorter than this sit on ridges
# of the distance transform where the offshore direction is undefined.
GRAD_EPS = 1e-6

# A sky band must touch the top border across at least this fraction of
# columns to count as a skyline.
SKYLINE_MIN_FRAC = 0.5

# Edge pixels this close below the skyline band are treated as skyline
# residue, not coastline candidates.
SKYLINE_MARGIN = 2


@dataclass
class Shoreline:
    """Coastline pixels (x, y), one per column, ordered by x.

    closed_by_border is set when columns without a detected boundary were
    filled with bottom-row points.
    """

    points: np.ndarray
    closed_by_border: bool

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if self.points.shape[0] == 0:
            raise InputError("Shoreline requires at least one point")


@dataclass
class DistanceMatrix:
    """Per-pixel Euclidean distance to the nearest shoreline point."""

    s: np.ndarray


@dataclass
class Skyline:
    """Lower boundary of the top sky band.

    profile[x] is the first sea/below-band row in column x (0 where the
    band does not cover that column); focal is the band midpoint used as
    the one-point-perspective reference.
    """

    profile: np.ndarray
    focal: tuple[float, float]


@dataclass
class DirectionField:
    """Unit offshore direction (ox, oy) per pixel with validity flags."""

    ox: np.ndarray
    oy: np.ndarray
    valid: np.ndarray
    focal: tuple[float, float] | None = None
    local_part: "DirectionField | None" = None
    global_part: "DirectionField | None" = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.ox.shape  # type: ignore[return-value]


def canny_edges(field: np.ndarray, lo: float = CANNY_LO, hi: float = CANNY_HI) -> np.ndarray:
    """Edge map of a float field: Sobel, non-maximum suppression along the
    gradient, then hysteresis on the normalized magnitude."""
    gx = ndimage.sobel(field, axis=1, mode="nearest")
    gy = ndimage.sobel(field, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 0:
        return np.zeros(field.shape, dtype=bool)
    mag = mag / peak

    # Quantize gradient orientation to 4 directions and keep local maxima.
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    padded = np.pad(mag, 1, mode="constant")
    h, w = mag.shape
    yy, xx = np.mgrid[0:h, 0:w]

    sector = np.zeros(mag.shape, dtype=np.int8)
    sector[(angle >= 22.5) & (angle < 67.5)] = 1
    sector[(angle >= 67.5) & (angle < 112.5)] = 2
    sector[(angle >= 112.5) & (angle < 157.5)] = 3
    # Neighbor offsets (dy, dx) along the gradient for each sector.
    offs = np.array([[0, 1], [1, 1], [1, 0], [1, -1]])
    dy = offs[sector][..., 0]
    dx = offs[sector][..., 1]
    n1 = padded[yy + 1 + dy, xx + 1 + dx]
    n2 = padded[yy + 1 - dy, xx + 1 - dx]
    ridge = (mag >= n1) & (mag >= n2) & (mag > 0)

    weak = ridge & (mag >= lo)
    strong = ridge & (mag >= hi)
    if not strong.any():
        return np.zeros(field.shape, dtype=bool)
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    keep = np.unique(labels[strong])
    return weak & np.isin(labels, keep[keep > 0])


def detect_skyline(shore: BinaryMask) -> Skyline | None:
    """Sky band detection: a non-water band touching the top border.

    Returns None (overhead view) unless the band covers at least
    SKYLINE_MIN_FRAC of the columns. The focal point is the median band
    column paired with the band depth there.
    """
    bits = shore.bits
    h, w = bits.shape
    # Depth of the uninterrupted true-run from the top, per column.
    run = np.cumprod(bits, axis=0)
    depth = run.sum(axis=0)
    band_cols = np.nonzero(depth > 0)[0]
    if band_cols.size * 2 < w:
        return None
    profile = depth.astype(np.int64)
    fx = int(band_cols[band_cols.size // 2])
    return Skyline(profile=profile, focal=(float(fx), float(profile[fx])))


def detect_coastline(
    shore: BinaryMask,
    gauss_sigma: float = CANNY_GAUSS_SIGMA,
    canny_lo: float = CANNY_LO,
    canny_hi: float = CANNY_HI,
) -> Shoreline:
    """Coastline as the lowest boundary-edge pixel per column.

    The mask is Gaussian-smoothed and edge-detected; edges inside or just
    below the skyline band are excluded. Columns with no remaining edge
    are filled with bottom-row points and flagged via closed_by_border.
    """
    bits = shore.bits
    if bits.all() or not bits.any():
        raise NoCoastlineError("shore mask must contain both water and non-water pixels")
    h, w = bits.shape
    smoothed = ndimage.gaussian_filter(bits.astype(np.float64), gauss_sigma, mode="nearest")
    edges = canny_edges(smoothed, canny_lo, canny_hi)

    sky = detect_skyline(shore)
    floor = sky.profile + SKYLINE_MARGIN if sky is not None else np.full(w, -1)

    points = np.empty((w, 2), dtype=np.float64)
    closed = False
    for x in range(w):
        rows = np.nonzero(edges[:, x])[0]
        rows = rows[rows > floor[x]]
        if rows.size:
            points[x] = (x, rows.max())
        else:
            points[x] = (x, h - 1)
            closed = True
    return Shoreline(points=points, closed_by_border=closed)


def distance_matrix(shoreline: Shoreline, width: int, height: int) -> DistanceMatrix:
    """Exact Euclidean distance from every pixel to the nearest shoreline point.

    Integer-coordinate shorelines go through the exact distance transform;
    fractional points fall back to a chunked brute-force minimum. Both
    paths agree with the O(W*H*n) definition.
    """
    pts = shoreline.points
    inside = (
        (pts[:, 0] >= 0) & (pts[:, 0] <= width - 1) & (pts[:, 1] >= 0) & (pts[:, 1] <= height - 1)
    )
    if not inside.all():
        raise InputError("shoreline points fall outside the frame")
    if np.allclose(pts, np.round(pts)):
        feature = np.ones((height, width), dtype=bool)
        ix = np.round(pts[:, 0]).astype(int)
        iy = np.round(pts[:, 1]).astype(int)
        feature[iy, ix] = False
        return DistanceMatrix(s=ndimage.distance_transform_edt(feature))

    yy, xx = np.mgrid[0:height, 0:width]
    best = np.full((height, width), np.inf)
    for start in range(0, pts.shape[0], 32):
        chunk = pts[start : start + 32]
        d2 = (xx[..., None] - chunk[:, 0]) ** 2 + (yy[..., None] - chunk[:, 1]) ** 2
        np.minimum(best, d2.min(axis=-1), out=best)
    return DistanceMatrix(s=np.sqrt(best))


def local_offshore(s: DistanceMatrix, sea: BinaryMask) -> DirectionField:
    """Normalized distance-matrix gradient on sea pixels.

    Ridge pixels of the distance transform (near-zero gradient) are
    invalid: the offshore direction is ambiguous there.
    """
    if s.s.shape != sea.bits.shape:
        raise DimensionError(f"local_offshore: S {s.s.shape} vs sea {sea.bits.shape}")
    gy, gx = np.gradient(s.s)
    norm = np.hypot(gx, gy)
    valid = sea.bits & (norm >= GRAD_EPS)
    safe = np.where(valid, norm, 1.0)
    return DirectionField(
        ox=np.where(valid, gx / safe, 0.0),
        oy=np.where(valid, gy / safe, 0.0),
        valid=valid,
    )


def global_offshore(
    focal: tuple[float, float], width: int, height: int, sea: BinaryMask
) -> DirectionField:
    """Unit vectors from each sea pixel toward the focal point."""
    if sea.bits.shape != (height, width):
        raise DimensionError(f"global_offshore: sea {sea.bits.shape} vs ({height}, {width})")
    yy, xx = np.mgrid[0:height, 0:width]
    dx = focal[0] - xx
    dy = focal[1] - yy
    norm = np.hypot(dx, dy)
    valid = sea.bits & (norm > 0)
    safe = np.where(valid, norm, 1.0)
    return DirectionField(
        ox=np.where(valid, dx / safe, 0.0),
        oy=np.where(valid, dy / safe, 0.0),
        valid=valid,
        focal=focal,
    )


def aggregate_offshore(
    local: DirectionField,
    global_: DirectionField | None = None,
    focal: tuple[float, float] | None = None,
    shoreline: Shoreline | None = None,
) -> DirectionField:
    """Blend local and global offshore directions by distance to focal.

    Without a skyline the result is exactly the local field. Otherwise
    R = (Q/Q_max)^2 clamped to [0,1] weighs the local part, 1-R the global
    part, with Q the pixel-to-focal distance and Q_max the largest
    shoreline-to-focal distance. R = 0 and R = 1 pass the respective
    component through untouched, so the endpoint limits are exact.
    """
    if not local.valid.any():
        raise InputError("aggregate_offshore: local field has no valid pixels")
    if global_ is None or focal is None:
        return replace(local, ox=local.ox.copy(), oy=local.oy.copy(), valid=local.valid.copy())
    if shoreline is None:
        raise InputError("aggregate_offshore: shoreline required when a focal point is present")
    if local.ox.shape != global_.ox.shape:
        raise DimensionError("aggregate_offshore: component shape mismatch")

    h, w = local.ox.shape
    yy, xx = np.mgrid[0:h, 0:w]
    q = np.hypot(xx - focal[0], yy - focal[1])
    q_max = np.hypot(shoreline.points[:, 0] - focal[0], shoreline.points[:, 1] - focal[1]).max()
    if q_max <= 0:
        raise InputError("aggregate_offshore: shoreline coincides with the focal point")
    r = np.clip((q / q_max) ** 2, 0.0, 1.0)
    wg = 1.0 - r
    assert bool(((wg + r) == 1.0).all()), "blend weights must sum to 1 exactly"

    take_g = r == 0.0
    take_l = r == 1.0
    mid = ~(take_g | take_l)

    bx = wg * global_.ox + r * local.ox
    by = wg * global_.oy + r * local.oy
    norm = np.hypot(bx, by)
    valid = mid & local.valid & global_.valid & (norm > 0)
    safe = np.where(valid, norm, 1.0)
    ox = np.where(valid, bx / safe, 0.0)
    oy = np.where(valid, by / safe, 0.0)

    for take, comp in ((take_g, global_), (take_l, local)):
        ox[take] = comp.ox[take]
        oy[take] = comp.oy[take]
        valid[take] = comp.valid[take]
    return DirectionField(
        ox=ox, oy=oy, valid=valid, focal=focal, local_part=local, global_part=global_
    )


def offshore_field(
    shore: BinaryMask,
    gauss_sigma: float = CANNY_GAUSS_SIGMA,
    canny_lo: float = CANNY_LO,
    canny_hi: float = CANNY_HI,
) -> tuple[DirectionField, Shoreline]:
    """Full geometry chain from a shore mask to the blended offshore field."""
    h, w = shore.bits.shape
    sea = shore.inverted()
    shoreline = detect_coastline(shore, gauss_sigma, canny_lo, canny_hi)
    s = distance_matrix(shoreline, w, h)
    local = local_offshore(s, sea)
    sky = detect_skyline(shore)
    if sky is None:
        return aggregate_offshore(local), shoreline
    glob = global_offshore(sky.focal, w, h, sea)
    return aggregate_offshore(local, glob, sky.focal, shoreline), shoreline


def save_direction(directory: str | Path, field: DirectionField) -> None:
    """Write ox.csv, oy.csv and valid.png into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frame_io.write_grid_csv(directory / "ox.csv", field.ox)
    frame_io.write_grid_csv(directory / "oy.csv", field.oy)
    frame_io.save_mask(
        directory / "valid.png", BinaryMask(field.valid, frame_io.MaskKind.COMBINED)
    )


def load_direction(directory: str | Path) -> DirectionField:
    """Read a field written by save_direction."""
    directory = Path(directory)
    ox = frame_io.read_grid_csv(directory / "ox.csv")
    oy = frame_io.read_grid_csv(directory / "oy.csv")
    valid = frame_io.load_mask(directory / "valid.png").bits
    return DirectionField(ox=ox, oy=oy, valid=valid)
