"""Frame and mask loading into canonical in-memory grid types.

Coordinate convention used across the whole package: a pixel (x, y) has
x = column index increasing rightward and y = row index increasing
downward. Grids are numpy arrays indexed ``grid[y, x]`` with shape (H, W).
Velocity components are u = +x and v = +y in pixels/frame.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .errors import DimensionError, InputError, InsufficientDataError

# Fixed luma weights for RGB -> gray conversion, kept explicit so test
# oracles can reproduce the conversion exactly.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

SUPPORTED_SUFFIXES = {".png", ".pgm", ".ppm", ".pbm"}


class MaskKind(str, Enum):
    SHORE = "shore"
    WAVE = "wave"
    COMBINED = "combined"
    RIP_REGION = "rip_region"
    GROUND_TRUTH = "ground_truth"


@dataclass
class Frame:
    """One video frame: gray intensities in [0, 1], optional HSV planes.

    ``hsv`` has shape (H, W, 3) with hue in degrees [0, 360), saturation
    and value in [0, 1]. It is present only when the source image had
    color channels.
    """

    gray: np.ndarray
    hsv: np.ndarray | None = None

    @property
    def height(self) -> int:
        return self.gray.shape[0]

    @property
    def width(self) -> int:
        return self.gray.shape[1]

    @property
    def has_color(self) -> bool:
        return self.hsv is not None


@dataclass
class FrameSequence:
    """Ordered frames of uniform size with a fixed frame interval (seconds)."""

    frames: list[Frame]
    width: int
    height: int
    frame_interval: float

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, index: int) -> Frame:
        return self.frames[index]

    def gray_stack(self) -> np.ndarray:
        """All gray planes as one (N, H, W) array."""
        return np.stack([f.gray for f in self.frames], axis=0)


@dataclass
class BinaryMask:
    """Per-pixel boolean grid; True marks the kind-specific region."""

    bits: np.ndarray
    kind: MaskKind = MaskKind.COMBINED

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=bool)

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape  # type: ignore[return-value]

    def count(self) -> int:
        return int(self.bits.sum())

    def inverted(self, kind: MaskKind | None = None) -> "BinaryMask":
        return BinaryMask(~self.bits, kind or self.kind)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luma-weighted grayscale of an (H, W, 3) RGB array in [0, 1]."""
    r, g, b = LUMA_WEIGHTS
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Vectorized RGB -> HSV with hue in degrees [0, 360), S and V in [0, 1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)

    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        hr = np.where(c > 0, ((g - b) / c) % 6.0, 0.0)
        hg = np.where(c > 0, (b - r) / c + 2.0, 0.0)
        hb = np.where(c > 0, (r - g) / c + 4.0, 0.0)
    h = np.where(v == r, hr, np.where(v == g, hg, hb))
    h = np.where(c > 0, h * 60.0, 0.0) % 360.0
    return np.stack([h, s, v], axis=-1)


def _decode_image(path: Path) -> tuple[np.ndarray, np.ndarray | None]:
    """Decode an image file to (gray in [0,1], optional rgb in [0,1])."""
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode in ("P", "LA", "RGBA"):
                img = img.convert("RGB")
                mode = "RGB"
            arr = np.asarray(img)
    except (OSError, SyntaxError) as exc:
        raise InputError(f"cannot decode image {path}: {exc}") from exc

    if mode == "RGB":
        rgb = arr.astype(np.float64) / 255.0
        return rgb_to_gray(rgb), rgb
    if mode == "L":
        return arr.astype(np.float64) / 255.0, None
    if mode in ("I", "I;16", "I;16B"):
        return arr.astype(np.float64) / 65535.0, None
    if mode == "1":
        return arr.astype(np.float64), None
    raise InputError(f"unsupported image mode {mode!r} in {path}")


def load_frame(path: str | Path) -> Frame:
    """Load one image file as a Frame (gray + HSV planes when colored)."""
    gray, rgb = _decode_image(Path(path))
    hsv = rgb_to_hsv(rgb) if rgb is not None else None
    return Frame(gray=gray, hsv=hsv)


def load_sequence(
    directory: str | Path,
    pattern: str = "*.png",
    frame_interval: float = 1.0,
) -> FrameSequence:
    """Load all images matching ``pattern`` in lexicographic filename order.

    Raises InsufficientDataError for fewer than two frames and
    DimensionError (naming the offending file) on any size mismatch.
    """
    directory = Path(directory)
    if frame_interval <= 0:
        raise InputError(f"frame_interval must be positive, got {frame_interval}")
    if not directory.is_dir():
        raise InputError(f"frame directory not found: {directory}")
    paths = sorted(directory.glob(pattern))
    if len(paths) < 2:
        raise InsufficientDataError(
            f"need at least 2 frames matching {pattern!r} in {directory}, found {len(paths)}"
        )

    frames: list[Frame] = []
    shape: tuple[int, int] | None = None
    for path in paths:
        frame = load_frame(path)
        if shape is None:
            shape = frame.gray.shape  # type: ignore[assignment]
        elif frame.gray.shape != shape:
            raise DimensionError(
                f"frame {path.name} is {frame.gray.shape[1]}x{frame.gray.shape[0]}, "
                f"expected {shape[1]}x{shape[0]}"
            )
        frames.append(frame)
    assert shape is not None
    return FrameSequence(
        frames=frames, width=shape[1], height=shape[0], frame_interval=frame_interval
    )


def load_mask(
    path: str | Path,
    kind: MaskKind = MaskKind.COMBINED,
    expect_shape: tuple[int, int] | None = None,
) -> BinaryMask:
    """Load a mask image; a pixel is True iff its luminance exceeds 0.5.

    ``expect_shape`` is (H, W) of the owning sequence; a mismatch raises
    DimensionError.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"mask file not found: {path}")
    gray, _ = _decode_image(path)
    if expect_shape is not None and gray.shape != tuple(expect_shape):
        raise DimensionError(
            f"mask {path.name} is {gray.shape[1]}x{gray.shape[0]}, "
            f"expected {expect_shape[1]}x{expect_shape[0]}"
        )
    return BinaryMask(bits=gray > 0.5, kind=kind)


def save_mask(path: str | Path, mask: BinaryMask) -> None:
    """Write a mask as an 8-bit PNG/PGM with values 0 and 255."""
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def save_gray_image(path: str | Path, gray: np.ndarray, bit_depth: int = 16) -> None:
    """Write a [0, 1] intensity grid as an 8- or 16-bit grayscale PNG."""
    gray = np.clip(np.asarray(gray, dtype=np.float64), 0.0, 1.0)
    if bit_depth == 8:
        img = Image.fromarray(np.round(gray * 255.0).astype(np.uint8), mode="L")
    elif bit_depth == 16:
        arr = np.round(gray * 65535.0).astype(np.uint16)
        img = Image.fromarray(arr.astype(np.int32), mode="I").convert("I;16")
    else:
        raise InputError(f"bit_depth must be 8 or 16, got {bit_depth}")
    img.save(path)


def save_rgb_image(path: str | Path, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 array as a PNG."""
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def write_grid_csv(path: str | Path, grid: np.ndarray, fmt: str = "%.17g") -> None:
    """Serialize a 2-D grid row-major as CSV."""
    np.savetxt(path, np.asarray(grid), fmt=fmt, delimiter=",")


def read_grid_csv(path: str | Path, dtype=np.float64) -> np.ndarray:
    """Read a row-major CSV grid written by write_grid_csv."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"grid file not found: {path}")
    arr = np.loadtxt(path, delimiter=",", dtype=dtype, ndmin=2)
    return arr


def write_points_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Small CSV writer for tabular outputs (trajectories, PR curves)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
