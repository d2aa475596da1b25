"""Synthetic nearshore scenes with analytically known flow and rip masks.

Real surf-zone footage with expert annotations is not shippable, so
end-to-end validation runs on generated scenes: a band-limited noise
texture advected by a prescribed current field (an offshore jet inside a
band, alongshore drift elsewhere, optional uniform wave bobbing) over a
static sand strip.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli
from scipy import ndimage

from . import frame_io
from .errors import ConfigError, InputError
from .frame_io import BinaryMask, Frame, FrameSequence, MaskKind
from .optflow import VelocityField, save_velocity
from .sampling import bilinear_sample

# Estimators here have no coarse-to-fine pyramid; keep per-frame motion
# well inside the small-displacement regime.
MAX_SPEED = 3.0

TEXTURE_SIGMA = 2.0


@dataclass
class JetSpec:
    """Offshore jet band: |x - center_x| <= width/2, speed in -y."""

    center_x: float
    width: float
    speed: float


@dataclass
class SceneSpec:
    """Parameters of one synthetic scene; see module docstring."""

    width: int
    height: int
    n_frames: int
    shoreline_row: int
    jet: JetSpec
    alongshore_speed: float = 0.0
    wave_amp: float = 0.0
    wave_period: float = 8.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.width < 8 or self.height < 8:
            raise ConfigError("scene must be at least 8x8")
        if self.n_frames < 1:
            raise ConfigError(f"n_frames must be >= 1, got {self.n_frames}")
        if not 0 < self.shoreline_row < self.height:
            raise ConfigError(
                f"shoreline_row must lie inside the frame, got {self.shoreline_row}"
            )
        half = self.jet.width / 2.0
        if self.jet.center_x - half < 0 or self.jet.center_x + half > self.width - 1:
            raise ConfigError("jet band must lie within the frame")
        peak = max(abs(self.jet.speed), abs(self.alongshore_speed)) + abs(self.wave_amp)
        if peak >= MAX_SPEED:
            raise ConfigError(f"speeds must stay below {MAX_SPEED} px/frame, got {peak}")
        if self.wave_amp != 0 and self.wave_period <= 0:
            raise ConfigError("wave_period must be positive when wave_amp is nonzero")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")


def scene_from_toml(path: str | Path) -> SceneSpec:
    """Read a SceneSpec from a TOML file with [scene] and [scene.jet]."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"scene file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid scene TOML {path}: {exc}") from exc
    try:
        scene = dict(data["scene"])
        jet = JetSpec(**scene.pop("jet"))
        return SceneSpec(jet=jet, **scene)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad scene structure in {path}: {exc}") from exc


def _region_masks(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """(sea, jet_band) boolean grids."""
    yy, xx = np.mgrid[0 : spec.height, 0 : spec.width]
    sea = yy < spec.shoreline_row
    band = sea & (np.abs(xx - spec.jet.center_x) <= spec.jet.width / 2.0)
    return sea, band


def ground_truth_flow(spec: SceneSpec, t: int) -> VelocityField:
    """Analytic velocity field carrying frame t to frame t + 1."""
    if not 0 <= t < spec.n_frames:
        raise InputError(f"t must lie in [0, {spec.n_frames}), got {t}")
    sea, band = _region_masks(spec)
    u = np.where(sea & ~band, spec.alongshore_speed, 0.0)
    v = np.where(band, -spec.jet.speed, 0.0)
    if spec.wave_amp != 0:
        v = v + np.where(sea, spec.wave_amp * np.sin(2.0 * np.pi * t / spec.wave_period), 0.0)
    return VelocityField(u=u, v=v, valid=np.ones_like(sea, dtype=bool))


def _texture(rng: np.random.Generator, height: int, width: int, lo: float, hi: float) -> np.ndarray:
    """Band-limited noise in [lo, hi], periodic so warps can wrap."""
    noise = ndimage.gaussian_filter(rng.standard_normal((height, width)), TEXTURE_SIGMA, mode="wrap")
    span = noise.max() - noise.min()
    unit = (noise - noise.min()) / span if span > 0 else np.zeros_like(noise)
    return lo + (hi - lo) * unit


def rip_ground_truth(spec: SceneSpec) -> BinaryMask:
    """Ground-truth rip mask: the jet band restricted to sea pixels."""
    _, band = _region_masks(spec)
    return BinaryMask(band, MaskKind.GROUND_TRUTH)


def shore_ground_truth(spec: SceneSpec) -> BinaryMask:
    """Shore mask matching the rendered scene: rows >= shoreline_row."""
    sea, _ = _region_masks(spec)
    return BinaryMask(~sea, MaskKind.SHORE)


def render_sequence(spec: SceneSpec) -> tuple[FrameSequence, BinaryMask, BinaryMask]:
    """Render frames plus the shore and rip ground-truth masks.

    Sea texture is advected by backward warping against the accumulated
    ground-truth displacement with periodic bilinear sampling; the sand
    strip is static. Identical specs render bit-identical sequences.
    """
    rng = np.random.default_rng(spec.seed)
    sea_tex = _texture(rng, spec.height, spec.width, 0.15, 0.85)
    sand_tex = _texture(rng, spec.height, spec.width, 0.60, 0.95)
    sea, _ = _region_masks(spec)
    yy, xx = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)

    frames: list[Frame] = []
    disp_u = np.zeros((spec.height, spec.width))
    disp_v = np.zeros((spec.height, spec.width))
    for t in range(spec.n_frames):
        if t > 0:
            gt = ground_truth_flow(spec, t - 1)
            disp_u += gt.u
            disp_v += gt.v
        warped = bilinear_sample(sea_tex, xx - disp_u, yy - disp_v, mode="wrap")
        img = np.where(sea, warped, sand_tex)
        if spec.noise_sigma > 0:
            frame_rng = np.random.default_rng([spec.seed, 1000 + t])
            img = img + frame_rng.normal(0.0, spec.noise_sigma, img.shape)
        frames.append(Frame(gray=np.clip(img, 0.0, 1.0)))

    seq = FrameSequence(
        frames=frames, width=spec.width, height=spec.height, frame_interval=1.0
    )
    return seq, shore_ground_truth(spec), rip_ground_truth(spec)


def write_scene(spec: SceneSpec, out_dir: str | Path) -> Path:
    """Render and save a scene: frames/, shore.png, rip_gt.png, gt_flow/."""
    out = Path(out_dir)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    seq, shore, rip = render_sequence(spec)
    for t, frame in enumerate(seq.frames):
        frame_io.save_gray_image(frames_dir / f"frame_{t:04d}.png", frame.gray, bit_depth=16)
    frame_io.save_mask(out / "shore.png", shore)
    frame_io.save_mask(out / "rip_gt.png", rip)
    save_velocity(out / "gt_flow", ground_truth_flow(spec, 0))
    return out
