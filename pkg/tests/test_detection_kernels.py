"""NMS, confidence filtering, detection capping, and the RoIAlign kernel."""

import numpy as np
import pytest

from bottleseg.detection_kernels import (
    Roi,
    ScoredBox,
    cap_detections,
    confidence_filter,
    nms,
    roi_align,
)
from bottleseg.geometry import BBox

from oracles import nms_oracle, roi_align_dense_oracle


def random_scored_boxes(rng, n, categories=("bottle",)):
    boxes = []
    for _ in range(n):
        boxes.append(
            ScoredBox(
                bbox=BBox(
                    float(rng.uniform(0, 20)),
                    float(rng.uniform(0, 20)),
                    float(rng.uniform(0.5, 12)),
                    float(rng.uniform(0.5, 12)),
                ),
                score=round(float(rng.uniform(0, 1)), 2),
                category=str(rng.choice(categories)),
            )
        )
    return boxes


class TestNms:
    def test_identical_boxes_keep_highest(self):
        box = BBox(0, 0, 4, 4)
        low = ScoredBox(box, 0.8, "bottle")
        high = ScoredBox(box, 0.9, "bottle")
        assert nms([low, high], 0.5) == [high]

    @pytest.mark.parametrize("threshold", [0.3, 0.5, 1.0])
    def test_disjoint_boxes_all_kept(self, threshold):
        boxes = [
            ScoredBox(BBox(0, 0, 2, 2), 0.9, "bottle"),
            ScoredBox(BBox(10, 10, 2, 2), 0.5, "bottle"),
            ScoredBox(BBox(20, 0, 2, 2), 0.7, "bottle"),
        ]
        kept = nms(boxes, threshold)
        assert sorted(b.score for b in kept) == [0.5, 0.7, 0.9]

    def test_threshold_zero_keeps_top_per_category(self):
        boxes = [
            ScoredBox(BBox(0, 0, 2, 2), 0.9, "bottle"),
            ScoredBox(BBox(50, 50, 2, 2), 0.8, "bottle"),
            ScoredBox(BBox(90, 90, 2, 2), 0.7, "can"),
        ]
        # Any pair of boxes has IoU >= 0, so only the first visit per
        # category survives the strict keep rule at threshold 0.
        assert nms(boxes, 0.0) == [boxes[0], boxes[2]]

    def test_per_category_suppression(self):
        box = BBox(0, 0, 4, 4)
        a = ScoredBox(box, 0.9, "bottle")
        b = ScoredBox(box, 0.8, "can")
        assert nms([a, b], 0.5) == [a, b]

    def test_output_order_and_tie_break(self):
        first = ScoredBox(BBox(0, 0, 2, 2), 0.7, "bottle")
        second = ScoredBox(BBox(30, 0, 2, 2), 0.7, "bottle")
        third = ScoredBox(BBox(60, 0, 2, 2), 0.9, "bottle")
        assert nms([first, second, third], 0.5) == [third, first, second]

    def test_matches_literal_oracle(self):
        rng = np.random.default_rng(43)
        for _ in range(60):
            n = int(rng.integers(1, 25))
            candidates = random_scored_boxes(rng, n, categories=("bottle", "can"))
            threshold = float(rng.uniform(0, 1))
            kept = nms(candidates, threshold)
            want = nms_oracle(
                [(b.bbox.x, b.bbox.y, b.bbox.w, b.bbox.h) for b in candidates],
                [b.score for b in candidates],
                [b.category for b in candidates],
                threshold,
            )
            got_ids = [id(b) for b in kept]
            want_ids = [id(candidates[i]) for i in want]
            assert got_ids == want_ids

    def test_subset_and_determinism(self):
        rng = np.random.default_rng(47)
        candidates = random_scored_boxes(rng, 30)
        kept = nms(candidates, 0.4)
        assert all(any(k is c for c in candidates) for k in kept)
        assert nms(candidates, 0.4) == kept

    def test_threshold_monotonicity_counterexample(self):
        # Raising the threshold revives an intermediate box which then
        # suppresses a box that survived at the lower threshold, so the
        # keep-set is not monotone under set inclusion. The greedy rule
        # itself stays exactly as specified; this documents the behavior.
        z = ScoredBox(BBox(0, 0, 10, 10), 0.9, "bottle")
        y = ScoredBox(BBox(4, 0, 10, 10), 0.8, "bottle")
        x = ScoredBox(BBox(4.5, 0, 10, 10), 0.7, "bottle")
        low = nms([z, y, x], 0.4)
        high = nms([z, y, x], 0.6)
        assert low == [z, x]
        assert high == [z, y]
        assert not set(id(b) for b in low) <= set(id(b) for b in high)

    def test_keep_count_monotone_in_typical_range(self):
        rng = np.random.default_rng(53)
        for _ in range(200):
            candidates = random_scored_boxes(rng, int(rng.integers(2, 12)))
            t1, t2 = sorted(rng.uniform(0.3, 0.95, 2).tolist())
            assert len(nms(candidates, t1)) <= len(nms(candidates, t2))


class TestConfidenceFilter:
    def test_zero_threshold_keeps_all(self):
        boxes = random_scored_boxes(np.random.default_rng(59), 5)
        assert confidence_filter(boxes, 0.0) == boxes

    def test_counts_at_half(self):
        boxes = [
            ScoredBox(BBox(0, 0, 1, 1), 0.45, "bottle"),
            ScoredBox(BBox(0, 0, 1, 1), 0.7, "bottle"),
            ScoredBox(BBox(0, 0, 1, 1), 0.95, "bottle"),
        ]
        survivors = confidence_filter(boxes, 0.5)
        assert [b.score for b in survivors] == [0.7, 0.95]

    def test_exact_threshold_kept(self):
        box = ScoredBox(BBox(0, 0, 1, 1), 0.5, "bottle")
        assert confidence_filter([box], 0.5) == [box]

    def test_survivors_nested_as_threshold_drops(self):
        rng = np.random.default_rng(61)
        for _ in range(50):
            boxes = random_scored_boxes(rng, int(rng.integers(0, 20)))
            at_09 = {id(b) for b in confidence_filter(boxes, 0.9)}
            at_07 = {id(b) for b in confidence_filter(boxes, 0.7)}
            at_05 = {id(b) for b in confidence_filter(boxes, 0.5)}
            assert at_09 <= at_07 <= at_05


class TestCapDetections:
    def test_cap_above_count_keeps_all(self):
        boxes = random_scored_boxes(np.random.default_rng(67), 3)
        assert sorted(b.score for b in cap_detections(boxes, 512)) == sorted(
            b.score for b in boxes
        )

    def test_cap_two_keeps_highest(self):
        scores = [0.1, 0.9, 0.5, 0.7, 0.3]
        boxes = [ScoredBox(BBox(0, 0, 1, 1), s, "bottle") for s in scores]
        kept = cap_detections(boxes, 2)
        assert [b.score for b in kept] == [0.9, 0.7]

    def test_cap_zero(self):
        boxes = random_scored_boxes(np.random.default_rng(71), 4)
        assert cap_detections(boxes, 0) == []

    def test_tie_break_by_input_order(self):
        a = ScoredBox(BBox(0, 0, 1, 1), 0.5, "bottle")
        b = ScoredBox(BBox(1, 1, 1, 1), 0.5, "bottle")
        kept = cap_detections([a, b], 1)
        assert kept[0] is a


class TestRoiAlign:
    def test_constant_field_exact(self):
        rng = np.random.default_rng(73)
        for _ in range(20):
            h = int(rng.integers(1, 9))
            w = int(rng.integers(1, 9))
            value = float(rng.uniform(-5, 5))
            grid = np.full((h, w), value)
            # Rois inside the grid and hanging over the border.
            roi = (
                float(rng.uniform(-3, w)),
                float(rng.uniform(-3, h)),
                float(rng.uniform(w - 1, w + 3)),
                float(rng.uniform(h - 1, h + 3)),
            )
            n = int(rng.integers(1, 4))
            out = roi_align(grid, roi, 3, 2, samples_per_bin=n)
            assert (out == value).all()

    def test_center_sample_hand_value(self):
        grid = [[1.0, 2.0], [3.0, 4.0]]
        out = roi_align(grid, (0, 0, 1, 1), 1, 1, samples_per_bin=1)
        assert out.shape == (1, 1)
        assert out[0, 0] == 2.5

    def test_linearity(self):
        rng = np.random.default_rng(79)
        for _ in range(20):
            a = rng.uniform(-1, 1, (5, 6))
            b = rng.uniform(-1, 1, (5, 6))
            alpha, beta = rng.uniform(-2, 2, 2)
            roi = (0.3, 0.1, 4.7, 3.9)
            combined = roi_align(alpha * a + beta * b, roi, 3, 3)
            separate = alpha * roi_align(a, roi, 3, 3) + beta * roi_align(b, roi, 3, 3)
            assert np.abs(combined - separate).max() < 1e-9

    def test_agrees_with_dense_oracle(self):
        rng = np.random.default_rng(83)
        for _ in range(30):
            h = int(rng.integers(2, 10))
            w = int(rng.integers(2, 10))
            grid = rng.uniform(0.5, 1.5, (h, w))
            x1 = float(rng.uniform(0, w - 1.5))
            y1 = float(rng.uniform(0, h - 1.5))
            roi = (x1, y1, float(rng.uniform(x1 + 0.5, w)), float(rng.uniform(y1 + 0.5, h)))
            out_h = int(rng.integers(1, 5))
            out_w = int(rng.integers(1, 5))
            got = roi_align(grid, roi, out_h, out_w, samples_per_bin=2)
            want = np.array(roi_align_dense_oracle(grid.tolist(), roi, out_h, out_w))
            assert (np.abs(got - want) <= 0.02 * np.abs(want)).all()

    def test_multichannel_shape(self):
        grid = np.arange(24, dtype=float).reshape(2, 3, 4)
        out = roi_align(grid, Roi(0, 0, 3, 2), 2, 2)
        assert out.shape == (2, 2, 2)

    def test_inverted_roi_rejected(self):
        with pytest.raises(ValueError, match="inverted roi"):
            roi_align(np.ones((3, 3)), (2, 0, 1, 2), 1, 1)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError, match="empty grid"):
            roi_align(np.ones((0, 3)), (0, 0, 1, 1), 1, 1)

    def test_non_finite_grid_rejected(self):
        grid = np.ones((3, 3))
        grid[1, 1] = np.nan
        with pytest.raises(ValueError, match="finite"):
            roi_align(grid, (0, 0, 1, 1), 1, 1)

    def test_single_cell_grid(self):
        out = roi_align(np.array([[7.0]]), (-1, -1, 2, 2), 2, 2)
        assert (out == 7.0).all()


def test_cap_filter_nms_pipeline_deterministic():
    rng = np.random.default_rng(89)
    candidates = random_scored_boxes(rng, 40, categories=("bottle", "can"))
    first = cap_detections(confidence_filter(nms(candidates, 0.5), 0.3), 5)
    second = cap_detections(confidence_filter(nms(candidates, 0.5), 0.3), 5)
    assert first == second
