"""Square-pad transform arithmetic, polygon coordinate mapping, horizontal flip."""

import numpy as np
import pytest

from bottleseg.geometry import Polygon, rasterize_polygon
from bottleseg.preprocess import compute_square_pad, flip_horizontal, transform_polygon


def random_float_polygon(rng, lo, hi, n_min=3, n_max=10):
    n = int(rng.integers(n_min, n_max + 1))
    xs = rng.uniform(lo, hi, n)
    ys = rng.uniform(lo, hi, n)
    return Polygon(tuple((float(x), float(y)) for x, y in zip(xs, ys)))


class TestComputeSquarePad:
    def test_portrait_max_size_image(self):
        t = compute_square_pad(2448, 3264, 1024)
        assert t.scale == pytest.approx(1024 / 3264, abs=0)
        assert (t.scaled_h, t.scaled_w) == (768, 1024)
        assert (t.pad_top, t.pad_bottom) == (128, 128)
        assert (t.pad_left, t.pad_right) == (0, 0)
        assert (t.out_h, t.out_w) == (1024, 1024)

    def test_identity_at_target(self):
        t = compute_square_pad(1024, 1024, 1024)
        assert t.scale == 1.0
        assert t.pad_top == t.pad_left == 0
        assert (t.scaled_h, t.scaled_w) == (1024, 1024)

    def test_min_size_image_upscale(self):
        t = compute_square_pad(150, 225, 1024)
        assert t.scale == pytest.approx(1024 / 225, abs=0)
        assert (t.scaled_h, t.scaled_w) == (683, 1024)
        assert (t.pad_top, t.pad_bottom) == (170, 171)
        assert t.scaled_h + t.pad_top + t.pad_bottom == 1024

    def test_rejects_degenerate_dims(self):
        with pytest.raises(ValueError):
            compute_square_pad(0, 10)

    def test_extents_always_hit_target(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            src_h = int(rng.integers(1, 5000))
            src_w = int(rng.integers(1, 5000))
            target = int(rng.integers(1, 2049))
            t = compute_square_pad(src_h, src_w, target)
            assert t.scaled_h + t.pad_top + t.pad_bottom == target
            assert t.scaled_w + t.pad_left + t.pad_right == target
            if src_h >= src_w:
                assert t.scaled_h == target and t.pad_top == t.pad_bottom == 0
            if src_w >= src_h:
                assert t.scaled_w == target and t.pad_left == t.pad_right == 0


class TestTransformPolygon:
    def test_identity_transform(self):
        t = compute_square_pad(1024, 1024, 1024)
        poly = Polygon(((1, 2), (3, 4), (5, 1)))
        assert transform_polygon(poly, t).vertices == ((1.0, 2.0), (3.0, 4.0), (5.0, 1.0))

    def test_origin_maps_to_pad_offset(self):
        t = compute_square_pad(2448, 3264, 1024)
        poly = Polygon(((0, 0), (1, 0), (0, 1)))
        forward = transform_polygon(poly, t, "forward")
        assert forward.vertices[0] == (0.0, 128.0)

    def test_unknown_direction(self):
        t = compute_square_pad(100, 100, 64)
        with pytest.raises(ValueError, match="direction"):
            transform_polygon(Polygon(((0, 0), (1, 0), (0, 1))), t, "sideways")

    def test_round_trip_within_tolerance(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            src_h = int(rng.integers(10, 4000))
            src_w = int(rng.integers(10, 4000))
            t = compute_square_pad(src_h, src_w, int(rng.integers(8, 2049)))
            poly = random_float_polygon(rng, 0, min(src_h, src_w))
            back = transform_polygon(transform_polygon(poly, t, "forward"), t, "inverse")
            for (x0, y0), (x1, y1) in zip(poly.vertices, back.vertices):
                assert abs(x0 - x1) < 1e-9
                assert abs(y0 - y1) < 1e-9

    def test_area_tracks_scale_for_large_polygons(self):
        # Rasterized pixel count after the transform stays within 2% of the
        # scale-squared prediction for regions at least ~20 px on a side in
        # both frames (rounding-seam sampling tolerance).
        rng = np.random.default_rng(31)
        for _ in range(25):
            src = int(rng.integers(64, 200))
            target = int(rng.integers(src, 3 * src))
            t = compute_square_pad(src, src, target)
            cx, cy = rng.uniform(25, src - 25, 2)
            radii = rng.uniform(12, min(20, cx, cy, src - cx, src - cy), 12)
            angles = np.sort(rng.uniform(0, 2 * np.pi, 12))
            verts = tuple(
                (float(cx + r * np.cos(a)), float(cy + r * np.sin(a)))
                for r, a in zip(radii, angles)
            )
            poly = Polygon(verts)
            src_count = int(rasterize_polygon(poly, src, src).sum())
            moved = transform_polygon(poly, t, "forward")
            dst_count = int(rasterize_polygon(moved, t.out_h, t.out_w).sum())
            predicted = src_count * t.scale * t.scale
            assert abs(dst_count - predicted) <= 0.02 * predicted


class TestFlipHorizontal:
    def test_edge_point(self):
        poly = Polygon(((0, 3), (2, 3), (0, 5)))
        flipped = flip_horizontal(poly, 10)
        assert flipped.vertices[0] == (10, 3)

    def test_involution(self):
        rng = np.random.default_rng(37)
        for _ in range(50):
            poly = random_float_polygon(rng, 0, 30)
            twice = flip_horizontal(flip_horizontal(poly, 30), 30)
            for (x0, y0), (x1, y1) in zip(poly.vertices, twice.vertices):
                assert x0 == pytest.approx(x1, abs=1e-12)
                assert y0 == y1

    def test_centerline_symmetric_polygon_fixed(self):
        # A diamond symmetric about x = 5 maps onto itself as a point set.
        poly = Polygon(((5, 0), (9, 4), (5, 8), (1, 4)))
        flipped = flip_horizontal(poly, 10)
        assert set(flipped.vertices) == set(poly.vertices)

    def test_flip_mirrors_rasterization(self):
        rng = np.random.default_rng(41)
        for _ in range(40):
            dim = int(rng.integers(4, 24))
            poly = random_float_polygon(rng, 0, dim)
            original = rasterize_polygon(poly, dim, dim)
            flipped = rasterize_polygon(flip_horizontal(poly, dim), dim, dim)
            assert (flipped == original[:, ::-1]).all()
            assert flipped.sum() == original.sum()
