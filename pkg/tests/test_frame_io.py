import numpy as np
import pytest

from ripflow import BinaryMask, Frame, FrameSequence, MaskKind
from ripflow.errors import DimensionError, InputError, InsufficientDataError
from ripflow.frame_io import (
    load_frame,
    load_mask,
    load_sequence,
    read_grid_csv,
    rgb_to_gray,
    rgb_to_hsv,
    save_gray_image,
    save_mask,
    save_rgb_image,
    write_grid_csv,
    write_points_csv,
)


def test_frame_properties(rng):
    gray = rng.random((12, 17))
    f = Frame(gray=gray)
    assert f.height == 12 and f.width == 17
    assert not f.has_color
    hsv = rng.random((12, 17, 3))
    assert Frame(gray=gray, hsv=hsv).has_color


def test_sequence_indexing(rng):
    frames = [Frame(gray=rng.random((8, 9))) for _ in range(4)]
    seq = FrameSequence(frames=frames, width=9, height=8, frame_interval=0.5)
    assert len(seq) == 4
    assert seq[2] is frames[2]
    stack = seq.gray_stack()
    assert stack.shape == (4, 8, 9)
    assert np.array_equal(stack[1], frames[1].gray)


def test_mask_count_and_inverted():
    bits = np.zeros((5, 5), dtype=bool)
    bits[1, 2] = bits[3, 3] = True
    m = BinaryMask(bits, MaskKind.SHORE)
    assert m.count() == 2
    inv = m.inverted()
    assert inv.count() == 23
    assert not (inv.bits & m.bits).any()


def test_mask_coerces_to_bool():
    m = BinaryMask(np.array([[0, 2], [1, 0]], dtype=np.uint8), MaskKind.SHORE)
    assert m.bits.dtype == bool
    assert m.count() == 2


def test_rgb_to_gray_matches_luma_weights(rng):
    rgb = rng.random((6, 7, 3))
    gray = rgb_to_gray(rgb)
    expect = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    assert np.allclose(gray, expect, atol=1e-12)


def test_rgb_to_hsv_primary_colors():
    # hue in degrees, S and V in [0, 1]
    rgb = np.array([[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.5]]])
    hsv = rgb_to_hsv(rgb)
    assert np.allclose(hsv[0, 0], [0.0, 1.0, 1.0])
    assert np.allclose(hsv[0, 1], [120.0, 1.0, 1.0])
    assert np.allclose(hsv[0, 2], [240.0, 1.0, 1.0])
    assert np.allclose(hsv[0, 3], [0.0, 0.0, 0.5])


def test_rgb_to_hsv_matches_scalar_reference(rng):
    import colorsys

    rgb = rng.random((5, 4, 3))
    hsv = rgb_to_hsv(rgb)
    for y in range(5):
        for x in range(4):
            h, s, v = colorsys.rgb_to_hsv(*rgb[y, x])
            assert abs(hsv[y, x, 0] - h * 360.0) < 1e-9 or abs(hsv[y, x, 0] - h * 360.0 - 360.0) < 1e-9
            assert abs(hsv[y, x, 1] - s) < 1e-9
            assert abs(hsv[y, x, 2] - v) < 1e-9


def test_gray_image_roundtrip_16bit(tmp_path, rng):
    gray = rng.random((10, 11))
    path = tmp_path / "f.png"
    save_gray_image(path, gray)
    back = load_frame(path)
    # 16-bit quantization: half of 1/65535 worst case
    assert np.abs(back.gray - gray).max() <= 0.5 / 65535 + 1e-12
    assert not back.has_color


def test_rgb_image_roundtrip(tmp_path, rng):
    rgb = rng.integers(0, 256, size=(9, 8, 3), dtype=np.uint8)
    path = tmp_path / "c.png"
    save_rgb_image(path, rgb)
    back = load_frame(path)
    assert back.has_color
    assert np.allclose(back.hsv[..., 2], rgb.max(axis=-1) / 255.0, atol=1e-12)


def test_mask_roundtrip(tmp_path, rng):
    bits = rng.random((14, 6)) > 0.5
    path = tmp_path / "m.png"
    save_mask(path, BinaryMask(bits, MaskKind.WAVE))
    back = load_mask(path, MaskKind.WAVE)
    assert np.array_equal(back.bits, bits)
    assert back.kind is MaskKind.WAVE


def test_load_mask_shape_check(tmp_path):
    save_mask(tmp_path / "m.png", BinaryMask(np.ones((4, 5), dtype=bool), MaskKind.SHORE))
    with pytest.raises(DimensionError):
        load_mask(tmp_path / "m.png", MaskKind.SHORE, expect_shape=(5, 4))


def test_load_sequence_sorted_and_missing(tmp_path):
    for i, level in ((2, 0.9), (0, 0.1), (1, 0.5)):
        save_gray_image(tmp_path / f"frame_{i:04d}.png", np.full((6, 6), level))
    seq = load_sequence(tmp_path, "*.png")
    assert len(seq) == 3
    # lexicographic filename order, not mtime order
    assert seq[0].gray[0, 0] < seq[1].gray[0, 0] < seq[2].gray[0, 0]
    with pytest.raises(InputError):
        load_sequence(tmp_path / "nope", "*.png")
    with pytest.raises(InsufficientDataError):
        load_sequence(tmp_path, "*.tif")


def test_load_sequence_size_mismatch(tmp_path, rng):
    save_gray_image(tmp_path / "a.png", rng.random((6, 6)))
    save_gray_image(tmp_path / "b.png", rng.random((7, 6)))
    with pytest.raises(DimensionError):
        load_sequence(tmp_path, "*.png")


def test_grid_csv_roundtrip_exact(tmp_path, rng):
    grid = rng.standard_normal((7, 5))
    path = tmp_path / "g.csv"
    write_grid_csv(path, grid)
    # %.17g prints doubles losslessly
    assert np.array_equal(read_grid_csv(path), grid)


def test_points_csv_header_and_rows(tmp_path):
    path = tmp_path / "p.csv"
    write_points_csv(path, ["a", "b"], [(1, 2.5), (3, 4.0)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "a,b"
    assert len(lines) == 3
