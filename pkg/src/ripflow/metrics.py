"""Pixel-level detection metrics: thresholded regions, PR curves, AUC, IoU/F1.

The likelihood matrix is swept over every distinct count value (plus a
sentinel above the maximum, giving the empty region) to produce the
precision-recall curve; AUC is the trapezoidal area over recall.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import frame_io
from .detect import LikelihoodMatrix
from .errors import DimensionError, UndefinedGroundTruthError
from .frame_io import BinaryMask, MaskKind


@dataclass
class PRCurve:
    """Operating points (threshold a, precision, recall), sorted by recall."""

    points: list[tuple[float, float, float]]
    auc: float


def threshold_region(likelihood: LikelihoodMatrix, a: float) -> BinaryMask:
    """Pixels with count >= a."""
    if a < 0:
        raise ValueError(f"threshold must be >= 0, got {a}")
    return BinaryMask(likelihood.counts >= a, MaskKind.RIP_REGION)


def precision_recall(r_a: BinaryMask, r_gt: BinaryMask) -> tuple[float, float]:
    """Pixel counts of the predicted region against ground truth.

    An empty prediction has no false positives, so precision is defined
    as 1 there (with recall 0); empty ground truth is an input error.
    """
    if r_a.bits.shape != r_gt.bits.shape:
        raise DimensionError(
            f"precision_recall: prediction {r_a.bits.shape} vs gt {r_gt.bits.shape}"
        )
    n_gt = r_gt.count()
    if n_gt == 0:
        raise UndefinedGroundTruthError("ground-truth region is empty")
    n_pred = r_a.count()
    inter = int((r_a.bits & r_gt.bits).sum())
    precision = 1.0 if n_pred == 0 else inter / n_pred
    return precision, inter / n_gt


def pr_curve(likelihood: LikelihoodMatrix, r_gt: BinaryMask) -> PRCurve:
    """Sweep all distinct count values plus an above-max sentinel.

    Thresholds are visited in descending order, so recall is
    non-decreasing along the curve. For the area, the curve is extended
    left to recall 0 at the precision of the smallest nonempty region and
    right to recall 1 at precision 0 when that recall is never reached.
    """
    thresholds = np.unique(likelihood.counts)[::-1].astype(np.float64)
    thresholds = np.concatenate([[float(likelihood.t + 1)], thresholds])

    points: list[tuple[float, float, float]] = []
    ops: list[tuple[float, float]] = []
    for a in thresholds:
        region = threshold_region(likelihood, a)
        p, r = precision_recall(region, r_gt)
        points.append((float(a), p, r))
        if region.count() > 0:
            ops.append((r, p))

    if ops:
        span = [(0.0, ops[0][1])] + ops
        if span[-1][0] < 1.0:
            span.append((1.0, 0.0))
        auc = 0.0
        for (r0, p0), (r1, p1) in zip(span, span[1:]):
            auc += (r1 - r0) * (p1 + p0) / 2.0
    else:
        auc = 0.0
    return PRCurve(points=points, auc=auc)


def mask_iou_f1(pred: BinaryMask, gt: BinaryMask) -> tuple[float, float]:
    """Intersection-over-union and F1 of two masks; (1, 1) when both empty."""
    if pred.bits.shape != gt.bits.shape:
        raise DimensionError(f"mask_iou_f1: {pred.bits.shape} vs {gt.bits.shape}")
    inter = int((pred.bits & gt.bits).sum())
    union = int((pred.bits | gt.bits).sum())
    denom = pred.count() + gt.count()
    if union == 0:
        return 1.0, 1.0
    return inter / union, 2.0 * inter / denom


def write_pr_csv(path: str | Path, curve: PRCurve) -> None:
    """Operating points as CSV rows (a, precision, recall)."""
    frame_io.write_points_csv(path, ["a", "precision", "recall"], curve.points)


def plot_pr_curve(curve: PRCurve, path: str | Path) -> None:
    """Optional PNG plot of the curve (requires matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    recalls = [p[2] for p in curve.points]
    precs = [p[1] for p in curve.points]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(recalls, precs, marker="o", lw=1.2)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"AUC = {curve.auc:.4f}")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
