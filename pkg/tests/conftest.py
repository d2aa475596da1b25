import numpy as np
import pytest
from scipy import ndimage

from ripflow import BinaryMask, MaskKind


def band_limited_texture(seed, n=128, sigma=4.0):
    """Smooth random texture in [0.15, 0.85], periodic so np.roll is exact."""
    rng = np.random.default_rng(seed)
    t = ndimage.gaussian_filter(rng.standard_normal((n, n)), sigma, mode="wrap")
    t = (t - t.min()) / (t.max() - t.min())
    return 0.15 + 0.7 * t


def straight_shore(width, height, row, kind=MaskKind.SHORE):
    """Shore mask: sand at y >= row, water above."""
    bits = np.zeros((height, width), dtype=bool)
    bits[row:] = True
    return BinaryMask(bits, kind)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
