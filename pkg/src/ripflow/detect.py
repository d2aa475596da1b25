"""Rip-region predicate and temporal fusion into the likelihood matrix.

A pixel is a rip candidate in one frame pair when it is open sea, its
velocity and offshore direction are both valid, it moves faster than
speed_eps, and the velocity has a strictly positive component along the
offshore direction. Counting candidate hits over T fused fields yields
the likelihood matrix L with values in [0, T].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, InsufficientDataError
from .frame_io import BinaryMask, FrameSequence, MaskKind
from .geometry import DirectionField
from .optflow import FlowConfig, VelocityField, compute_gradients, estimate_flow


@dataclass
class LikelihoodMatrix:
    """Per-pixel hit counts over t fused velocity fields."""

    counts: np.ndarray
    t: int

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.t < 0:
            raise ValueError(f"field count must be >= 0, got {self.t}")
        if self.counts.min(initial=0) < 0 or self.counts.max(initial=0) > self.t:
            raise ValueError("likelihood counts must lie in [0, t]")

    @classmethod
    def zeros(cls, height: int, width: int) -> "LikelihoodMatrix":
        return cls(counts=np.zeros((height, width), dtype=np.int64), t=0)

    def normalized(self) -> np.ndarray:
        if self.t == 0:
            raise ValueError("normalized view undefined for t = 0")
        return self.counts / self.t


def rip_region(
    v: VelocityField,
    o: DirectionField,
    combined: BinaryMask,
    speed_eps: float = 0.0,
) -> BinaryMask:
    """Per-pair rip candidate mask.

    The dot-product test is strictly positive: motion exactly along the
    shore (dot = 0) never counts.
    """
    if not (v.shape == o.shape == combined.bits.shape):
        raise DimensionError(
            f"rip_region: V {v.shape}, O {o.shape}, mask {combined.bits.shape}"
        )
    open_sea = ~combined.bits & v.valid & o.valid
    moving = v.speed() > speed_eps
    offshore = v.u * o.ox + v.v * o.oy > 0
    return BinaryMask(open_sea & moving & offshore, MaskKind.RIP_REGION)


def accumulate(likelihood: LikelihoodMatrix, region: BinaryMask) -> LikelihoodMatrix:
    """Fuse one rip-region mask: counts += membership, t += 1."""
    if likelihood.counts.shape != region.bits.shape:
        raise DimensionError(
            f"accumulate: L {likelihood.counts.shape} vs region {region.bits.shape}"
        )
    return LikelihoodMatrix(
        counts=likelihood.counts + region.bits.astype(np.int64), t=likelihood.t + 1
    )


MaskSource = BinaryMask | Sequence[BinaryMask]


def _mask_for(masks: MaskSource, index: int) -> BinaryMask:
    if isinstance(masks, BinaryMask):
        return masks
    return masks[index]


def detection_counts(
    seq: FrameSequence,
    cfg: FlowConfig,
    masks: MaskSource,
    o: DirectionField,
    t_indices: Sequence[int],
    stride: int = 1,
    speed_eps: float = 0.0,
) -> np.ndarray:
    """Raw hit counts for a subset of field indices.

    Used both by run_detection and by parallel workers; partial count
    grids from disjoint index sets merge by plain summation.
    """
    counts = np.zeros((seq.height, seq.width), dtype=np.int64)
    for t in t_indices:
        f0 = seq[t * stride]
        f1 = seq[t * stride + 1]
        g = compute_gradients(f0, f1, cfg.presmooth_sigma)
        v = estimate_flow(g, cfg)
        region = rip_region(v, o, _mask_for(masks, t), speed_eps)
        counts += region.bits
    return counts


def run_detection(
    seq: FrameSequence,
    cfg: FlowConfig,
    masks: MaskSource,
    o: DirectionField,
    t_fields: int = 20,
    stride: int = 1,
    speed_eps: float = 0.0,
) -> LikelihoodMatrix:
    """Full fusion: T velocity fields from pairs (t*stride, t*stride + 1).

    ``masks`` is a single combined mask shared by all pairs or one mask
    per field index (e.g. per-frame wave masks).
    """
    if t_fields < 1:
        raise ValueError(f"t_fields must be >= 1, got {t_fields}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    needed = t_fields * stride + 1
    if len(seq) < needed:
        raise InsufficientDataError(
            f"run_detection needs {needed} frames for T={t_fields}, stride={stride}; "
            f"sequence has {len(seq)}"
        )
    counts = detection_counts(seq, cfg, masks, o, range(t_fields), stride, speed_eps)
    return LikelihoodMatrix(counts=counts, t=t_fields)
