"""Coordinate geometry of the square resize-and-pad transform and flip augmentation.

Only annotation coordinates are transformed here; pixel resampling never
enters this toolkit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Polygon


@dataclass(frozen=True)
class SquarePadTransform:
    """Fit the long image side to ``target`` and zero-pad the short side.

    The scaled image is centered: the short axis receives floor(total/2)
    padding on the top/left and the remainder on the bottom/right.
    """

    src_h: int
    src_w: int
    target: int
    scale: float
    scaled_h: int
    scaled_w: int
    pad_top: int
    pad_left: int
    out_h: int
    out_w: int

    @property
    def pad_bottom(self) -> int:
        return self.target - self.scaled_h - self.pad_top

    @property
    def pad_right(self) -> int:
        return self.target - self.scaled_w - self.pad_left


def _round_half_up(value: float) -> int:
    return math.floor(value + 0.5)


def compute_square_pad(src_h: int, src_w: int, target: int = 1024) -> SquarePadTransform:
    """Transform parameters for resizing src_h x src_w into a target x target frame."""
    if src_h < 1 or src_w < 1 or target < 1:
        raise ValueError(f"dims must be >= 1, got src {src_h}x{src_w}, target {target}")
    scale = target / max(src_h, src_w)
    scaled_h = min(target, _round_half_up(src_h * scale))
    scaled_w = min(target, _round_half_up(src_w * scale))
    pad_top = (target - scaled_h) // 2
    pad_left = (target - scaled_w) // 2
    return SquarePadTransform(
        src_h=src_h,
        src_w=src_w,
        target=target,
        scale=scale,
        scaled_h=scaled_h,
        scaled_w=scaled_w,
        pad_top=pad_top,
        pad_left=pad_left,
        out_h=target,
        out_w=target,
    )


def transform_polygon(poly: Polygon, t: SquarePadTransform, direction: str = "forward") -> Polygon:
    """Map polygon vertices between the source frame and the padded frame.

    ``forward`` sends source coordinates to the padded target frame as
    (x, y) -> (x * scale + pad_left, y * scale + pad_top); ``inverse`` is
    the exact algebraic inverse.
    """
    if direction == "forward":
        verts = tuple((x * t.scale + t.pad_left, y * t.scale + t.pad_top) for x, y in poly.vertices)
    elif direction == "inverse":
        verts = tuple(((x - t.pad_left) / t.scale, (y - t.pad_top) / t.scale) for x, y in poly.vertices)
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return Polygon(verts)


def flip_horizontal(poly: Polygon, width: float) -> Polygon:
    """Mirror a polygon about the vertical centerline of a width-wide image."""
    return Polygon(tuple((width - x, y) for x, y in poly.vertices))
