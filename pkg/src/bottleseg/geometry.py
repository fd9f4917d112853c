"""Exact binary-mask and bounding-box arithmetic.

Binary masks are plain 2D boolean numpy arrays indexed (row, col).
Run-length encoding follows the COCO convention: the mask is scanned in
column-major order and runs alternate background/foreground, starting
with a background run (which may be zero-length).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Polygon:
    """Closed polygon in continuous image coordinates.

    ``vertices`` is an ordered sequence of (x, y) pairs; the edge from the
    last vertex back to the first is implicit. A polygon must have at
    least 3 vertices and all coordinates must be finite. Coordinates are
    kept exactly as given (ints stay ints), so serialization round-trips.
    """

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((v[0], v[1]) for v in self.vertices)
        if len(verts) < 3:
            raise ValueError(f"polygon needs at least 3 vertices, got {len(verts)}")
        for x, y in verts:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"polygon has non-finite vertex ({x}, {y})")
        object.__setattr__(self, "vertices", verts)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner (x, y) plus width and height."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"box sides must be non-negative, got w={self.w} h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class RleMask:
    """Column-major run-length encoded binary mask.

    ``counts`` alternates background/foreground run lengths starting with
    background; a leading 0 means the scan opens on foreground. A decodable
    value satisfies sum(counts) == height * width. That consistency is
    enforced by :func:`rle_decode` rather than here, so counts read from an
    untrusted document can be carried and rejected at decode time.
    """

    height: int
    width: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"mask dims must be >= 1, got {self.height}x{self.width}")
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ValueError("run lengths must be non-negative")
        object.__setattr__(self, "counts", counts)


def rasterize_polygon(poly: Polygon, height: int, width: int) -> np.ndarray:
    """Rasterize a polygon under the pixel-center even-odd rule.

    Pixel (r, c) is set iff its center (c + 0.5, r + 0.5) lies inside the
    closed polygon by even-odd crossing count. Centers exactly on an edge
    resolve deterministically through the half-open crossing test (the
    region below-right owns the edge). Vertices may lie outside the grid;
    the mask is simply clipped to it.
    """
    if height < 1 or width < 1:
        raise ValueError(f"grid dims must be >= 1, got {height}x{width}")
    xs = [float(x) for x, _ in poly.vertices]
    ys = [float(y) for _, y in poly.vertices]
    px = np.arange(width, dtype=float) + 0.5
    py = np.arange(height, dtype=float) + 0.5
    inside = np.zeros((height, width), dtype=bool)
    n = len(xs)
    for i in range(n):
        x1, y1 = xs[i], ys[i]
        x2, y2 = xs[(i + 1) % n], ys[(i + 1) % n]
        if y1 == y2:
            continue
        straddles = (y1 > py) != (y2 > py)
        if not straddles.any():
            continue
        t = (py - y1) / (y2 - y1)
        cross_x = x1 + t * (x2 - x1)
        inside ^= straddles[:, None] & (px[None, :] < cross_x[:, None])
    return inside


def rasterize_polygons(polys: Iterable[Polygon], height: int, width: int) -> np.ndarray:
    """Union of the rasterizations of several polygons (one instance region)."""
    mask = np.zeros((height, width), dtype=bool)
    for poly in polys:
        mask |= rasterize_polygon(poly, height, width)
    return mask


def rle_encode(mask: np.ndarray) -> RleMask:
    """Encode a boolean mask as column-major alternating run lengths."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"mask must be a non-empty 2D array, got shape {m.shape}")
    height, width = m.shape
    flat = m.flatten(order="F")
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return RleMask(height, width, tuple(int(c) for c in counts))


def rle_decode(rle: RleMask) -> np.ndarray:
    """Decode run lengths back to a boolean mask; exact inverse of rle_encode."""
    total = sum(rle.counts)
    expected = rle.height * rle.width
    if total != expected:
        raise ValueError(
            f"inconsistent rle: counts sum to {total}, expected {expected} "
            f"for a {rle.height}x{rle.width} mask"
        )
    values = (np.arange(len(rle.counts)) % 2).astype(bool)
    flat = np.repeat(values, rle.counts)
    return flat.reshape((rle.height, rle.width), order="F")


def mask_area(rle: RleMask) -> int:
    """Number of foreground pixels (sum of the foreground runs)."""
    return int(sum(rle.counts[1::2]))


def mask_iou_arrays(a: np.ndarray, b: np.ndarray, b_is_ignore: bool = False) -> float:
    """IoU of two boolean masks; 0/0 is defined as 0.

    With ``b_is_ignore`` set (COCO crowd semantics) the denominator is the
    area of ``a`` alone, so a prediction is scored by how much of it falls
    inside the ignore region.
    """
    if a.shape != b.shape:
        raise ValueError(f"mask dims differ: {a.shape} vs {b.shape}")
    inter = int(np.logical_and(a, b).sum())
    if b_is_ignore:
        denom = int(a.sum())
    else:
        denom = int(np.logical_or(a, b).sum())
    if denom == 0:
        return 0.0
    return inter / denom


def mask_iou(a: RleMask, b: RleMask, b_is_ignore: bool = False) -> float:
    """IoU of two RLE masks sharing the same dimensions."""
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"mask dims differ: {a.height}x{a.width} vs {b.height}x{b.width}"
        )
    return mask_iou_arrays(rle_decode(a), rle_decode(b), b_is_ignore)


def bbox_iou(a: BBox, b: BBox) -> float:
    """IoU of two boxes in continuous coordinates; 0/0 is defined as 0."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        inter = 0.0
    else:
        inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def bbox_from_mask(rle: RleMask) -> BBox:
    """Tightest pixel-aligned box around the foreground; empty mask gives (0,0,0,0)."""
    mask = rle_decode(rle)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return BBox(0, 0, 0, 0)
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return BBox(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
