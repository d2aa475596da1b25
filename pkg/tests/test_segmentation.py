import numpy as np
import pytest

from ripflow import BinaryMask, Frame, MaskKind, combined_mask, shore_mask, wave_mask
from ripflow.errors import DimensionError, InputError, UnsupportedInputError
from ripflow.frame_io import rgb_to_gray, rgb_to_hsv, save_mask
from ripflow.segmentation import WAVE_S_MAX, WAVE_V_MIN, threshold_shore_mask


def color_frame(rgb):
    return Frame(gray=rgb_to_gray(rgb), hsv=rgb_to_hsv(rgb))


def beach_scene(rng, w=40, h=30, shore_row=18):
    """Blue textured water above shore_row, tan textured sand below."""
    rgb = np.zeros((h, w, 3))
    rgb[:shore_row] = [0.10, 0.30, 0.70]
    rgb[shore_row:] = [0.75, 0.65, 0.45]
    # sand grain well above the texture-std threshold, hue still far from blue
    rgb += rng.uniform(-0.12, 0.12, size=rgb.shape)
    return color_frame(np.clip(rgb, 0.0, 1.0)), shore_row


def test_wave_mask_scalar_oracle(rng):
    rgb = rng.random((9, 11, 3))
    frame = color_frame(rgb)
    mask = wave_mask(frame)
    for y in range(9):
        for x in range(11):
            s, v = frame.hsv[y, x, 1], frame.hsv[y, x, 2]
            assert mask.bits[y, x] == ((s <= WAVE_S_MAX) and (v >= WAVE_V_MIN))


def test_wave_mask_catches_foam_patch(rng):
    frame, shore_row = beach_scene(rng)
    rgb = np.zeros((30, 40, 3))
    rgb[:] = [0.10, 0.30, 0.70]
    rgb[10:14, 5:15] = [0.95, 0.95, 0.92]  # near-white foam
    frame = color_frame(rgb)
    mask = wave_mask(frame)
    assert mask.bits[10:14, 5:15].all()
    assert not mask.bits[0:5, 0:5].any()


def test_wave_mask_rejects_grayscale(rng):
    with pytest.raises(UnsupportedInputError):
        wave_mask(Frame(gray=rng.random((8, 8))))


def test_shore_threshold_separates_beach(rng):
    frame, shore_row = beach_scene(rng)
    mask = threshold_shore_mask(frame)
    sand = mask.bits[shore_row + 2 :]
    sea = mask.bits[: shore_row - 2]
    assert sand.mean() >= 0.95
    assert 1.0 - sea.mean() >= 0.95


def test_shore_threshold_grayscale_texture_only(rng):
    gray = np.full((20, 20), 0.5)
    gray[12:, :] += rng.uniform(-0.3, 0.3, size=(8, 20))  # textured strip
    mask = threshold_shore_mask(Frame(gray=gray))
    assert mask.bits[14:18, 4:16].mean() > 0.9
    assert not mask.bits[0:8].any()


def test_shore_mask_external_file(tmp_path, rng):
    bits = rng.random((10, 12)) > 0.5
    save_mask(tmp_path / "shore.png", BinaryMask(bits, MaskKind.SHORE))
    frame = Frame(gray=rng.random((10, 12)))
    mask = shore_mask(frame, tmp_path / "shore.png")
    assert np.array_equal(mask.bits, bits)
    with pytest.raises(InputError):
        shore_mask(frame, tmp_path / "missing.png")
    save_mask(tmp_path / "bad.png", BinaryMask(np.ones((3, 3), dtype=bool), MaskKind.SHORE))
    with pytest.raises(DimensionError):
        shore_mask(frame, tmp_path / "bad.png")


def test_combined_mask_is_union(rng):
    a = rng.random((7, 7)) > 0.5
    b = rng.random((7, 7)) > 0.5
    out = combined_mask(BinaryMask(a, MaskKind.SHORE), BinaryMask(b, MaskKind.WAVE))
    assert np.array_equal(out.bits, a | b)
    assert out.kind is MaskKind.COMBINED
    with pytest.raises(DimensionError):
        combined_mask(
            BinaryMask(a, MaskKind.SHORE), BinaryMask(np.ones((3, 3), bool), MaskKind.WAVE)
        )


def test_combined_mask_absorbs_components(rng):
    a = rng.random((6, 6)) > 0.4
    b = rng.random((6, 6)) > 0.6
    out = combined_mask(BinaryMask(a, MaskKind.SHORE), BinaryMask(b, MaskKind.WAVE))
    assert (out.bits | a).sum() == out.count()
    assert (out.bits & a).sum() == a.sum()
    assert (out.bits & b).sum() == b.sum()
