"""Detection-side numerical kernels: NMS, confidence filtering, capping, RoIAlign.

All kernels are pure and bit-reproducible: every tie is broken by input
order. ``confidence_filter`` and ``cap_detections`` only look at a
``.score`` attribute, so they work on any scored record type.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, TypeVar

import numpy as np

from .geometry import BBox, bbox_iou

_Scored = TypeVar("_Scored")  # any object with a float .score attribute


@dataclass(frozen=True)
class ScoredBox:
    """A candidate detection: box, confidence in [0, 1], category label."""

    bbox: BBox
    score: float
    category: str

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class Roi:
    """Region of interest in continuous feature-grid coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float


def nms(candidates: Sequence[ScoredBox], iou_threshold: float) -> list[ScoredBox]:
    """Greedy per-category non-max suppression.

    Candidates are visited by descending score (ties by input order); a box
    is kept iff its IoU with every already-kept box of the same category is
    strictly below ``iou_threshold``. The result preserves descending-score
    order.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    order = sorted(range(len(candidates)), key=lambda i: -candidates[i].score)
    kept: list[int] = []
    for i in order:
        box = candidates[i]
        if all(
            bbox_iou(box.bbox, candidates[j].bbox) < iou_threshold
            for j in kept
            if candidates[j].category == box.category
        ):
            kept.append(i)
    return [candidates[i] for i in kept]


def confidence_filter(candidates: Sequence[_Scored], min_conf: float) -> list[_Scored]:
    """Keep exactly the candidates with score >= min_conf, order preserved."""
    if not 0.0 <= min_conf <= 1.0:
        raise ValueError(f"min_conf must be in [0, 1], got {min_conf}")
    return [c for c in candidates if c.score >= min_conf]


def cap_detections(candidates: Sequence[_Scored], max_instances: int) -> list[_Scored]:
    """Top ``max_instances`` candidates by score (ties by input order), score-sorted."""
    if max_instances < 0:
        raise ValueError(f"max_instances must be >= 0, got {max_instances}")
    order = sorted(range(len(candidates)), key=lambda i: -candidates[i].score)
    return [candidates[i] for i in order[:max_instances]]


def roi_align(
    grid: np.ndarray,
    roi: Roi | Sequence[float],
    out_h: int,
    out_w: int,
    samples_per_bin: int = 2,
) -> np.ndarray:
    """Average RoIAlign with bilinear sampling and no coordinate quantization.

    The grid holds one value per cell; the value of cell (r, c) sits at
    continuous location (x=c, y=r). The roi is split into out_h x out_w
    equal bins and each bin is sampled at samples_per_bin^2 regularly
    spaced interior points; samples outside the grid clamp to the border.
    The output bin value is the mean of its samples.

    Accepts a (rows, cols) or (channels, rows, cols) array and returns the
    same arrangement.
    """
    g = np.asarray(grid, dtype=float)
    squeeze = g.ndim == 2
    if squeeze:
        g = g[np.newaxis]
    if g.ndim != 3:
        raise ValueError(f"grid must be 2D or 3D, got {g.ndim}D")
    if g.size == 0:
        raise ValueError("empty grid")
    if not np.isfinite(g).all():
        raise ValueError("grid values must be finite")
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be >= 1, got {out_h}x{out_w}")
    if samples_per_bin < 1:
        raise ValueError(f"samples_per_bin must be >= 1, got {samples_per_bin}")
    if isinstance(roi, Roi):
        x1, y1, x2, y2 = roi.x1, roi.y1, roi.x2, roi.y2
    else:
        x1, y1, x2, y2 = (float(v) for v in roi)
    if x2 < x1 or y2 < y1:
        raise ValueError(f"inverted roi ({x1}, {y1}, {x2}, {y2})")

    channels, _, _ = g.shape
    n = int(samples_per_bin)
    offsets = (np.arange(n) + 0.5) / n
    sample_y = y1 + (np.arange(out_h)[:, None] + offsets).ravel() * ((y2 - y1) / out_h)
    sample_x = x1 + (np.arange(out_w)[:, None] + offsets).ravel() * ((x2 - x1) / out_w)
    values = _bilinear_product_grid(g, sample_y, sample_x)
    values = values.reshape(channels, out_h, n, out_w, n)
    # Averaging deviations from a per-bin reference sample keeps constant
    # fields exact: all deviations are exactly zero there.
    ref = values[:, :, :1, :, :1]
    out = ref[:, :, 0, :, 0] + (values - ref).mean(axis=(2, 4))
    return out[0] if squeeze else out


def _bilinear_product_grid(g: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear samples of g at every (y, x) in the product grid ys x xs."""
    _, height, width = g.shape
    yc = np.clip(ys, 0.0, height - 1.0)
    xc = np.clip(xs, 0.0, width - 1.0)
    y0 = np.minimum(np.floor(yc).astype(int), max(height - 2, 0))
    x0 = np.minimum(np.floor(xc).astype(int), max(width - 2, 0))
    y1 = np.minimum(y0 + 1, height - 1)
    x1 = np.minimum(x0 + 1, width - 1)
    wy = (yc - y0)[None, :, None]
    wx = (xc - x0)[None, None, :]
    v00 = g[:, y0[:, None], x0[None, :]]
    v01 = g[:, y0[:, None], x1[None, :]]
    v10 = g[:, y1[:, None], x0[None, :]]
    v11 = g[:, y1[:, None], x1[None, :]]
    top = v00 + wx * (v01 - v00)
    bottom = v10 + wx * (v11 - v10)
    return top + wy * (bottom - top)
