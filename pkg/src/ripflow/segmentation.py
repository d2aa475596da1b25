"""Shore, wave-foam, and combined exclusion masks.

Rip analysis only makes sense on open sea pixels: the shore mask removes
land/sky/objects, the wave mask removes breaking-wave foam whose apparent
motion mimics offshore currents, and the combined mask is their union.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from . import frame_io
from .errors import DimensionError, InputError, UnsupportedInputError
from .frame_io import BinaryMask, Frame, MaskKind

# Foam is near-white: low saturation, high value. Hue is deliberately
# ignored (low-saturation "light red" foam already falls in this box).
WAVE_S_MAX = 0.25
WAVE_V_MIN = 0.70

# Fallback shore heuristic: non-water = not blue-dominant and visibly
# textured. Only meant to keep the pipeline runnable without external
# masks; real deployments should pass a segmentation mask file.
BLUE_HUE_LO = 160.0
BLUE_HUE_HI = 280.0
BLUE_S_MIN = 0.15
TEXTURE_WINDOW = 7
TEXTURE_STD_MIN = 0.02


def _local_std(gray: np.ndarray, window: int) -> np.ndarray:
    mean = ndimage.uniform_filter(gray, window, mode="nearest")
    mean_sq = ndimage.uniform_filter(gray * gray, window, mode="nearest")
    var = np.maximum(mean_sq - mean * mean, 0.0)
    return np.sqrt(var)


def threshold_shore_mask(frame: Frame) -> BinaryMask:
    """Heuristic non-water mask: not blue-dominant and locally textured.

    On grayscale frames the color test degrades to "textured only".
    """
    textured = _local_std(frame.gray, TEXTURE_WINDOW) > TEXTURE_STD_MIN
    if frame.has_color:
        hue = frame.hsv[..., 0]
        sat = frame.hsv[..., 1]
        blueish = (hue >= BLUE_HUE_LO) & (hue <= BLUE_HUE_HI) & (sat >= BLUE_S_MIN)
    else:
        blueish = np.zeros_like(textured)
    return BinaryMask(~blueish & textured, MaskKind.SHORE)


def shore_mask(frame: Frame, source: str | Path = "threshold") -> BinaryMask:
    """Non-water mask, true on shore/sky/object pixels.

    ``source`` is either the literal string "threshold" (heuristic above)
    or a path to an external mask image, which always takes precedence in
    pipeline use. External masks must match the frame dimensions.
    """
    if isinstance(source, str) and source == "threshold":
        return threshold_shore_mask(frame)
    path = Path(source)
    if not path.exists():
        raise InputError(f"shore mask file not found: {path}")
    return frame_io.load_mask(path, kind=MaskKind.SHORE, expect_shape=frame.gray.shape)


def wave_mask(frame: Frame, s_max: float = WAVE_S_MAX, v_min: float = WAVE_V_MIN) -> BinaryMask:
    """Foam mask from HSV thresholds: saturation <= s_max and value >= v_min."""
    if not frame.has_color:
        raise UnsupportedInputError(
            "wave mask needs color frames; for grayscale input supply wave masks externally"
        )
    sat = frame.hsv[..., 1]
    val = frame.hsv[..., 2]
    return BinaryMask((sat <= s_max) & (val >= v_min), MaskKind.WAVE)


def combined_mask(shore: BinaryMask, wave: BinaryMask) -> BinaryMask:
    """Union of the exclusion masks; true pixels never enter rip analysis."""
    if shore.bits.shape != wave.bits.shape:
        raise DimensionError(
            f"combined_mask: shore {shore.bits.shape} vs wave {wave.bits.shape}"
        )
    return BinaryMask(shore.bits | wave.bits, MaskKind.COMBINED)
