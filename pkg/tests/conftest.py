"""Shared fixtures: a small annotated corpus exercised by CLI and acceptance tests."""

from __future__ import annotations

import json

import pytest

# Corpus: three images; dims include the published extremes 150x225 and
# 2448x3264 so dataset statistics reproduce the documented pixel-area range.
VIA_PROJECT = {
    "_via_settings": {"ui": {}},
    "_via_img_metadata": {
        "img_a.jpg123": {
            "filename": "img_a.jpg",
            "size": 123,
            "regions": [
                {
                    "shape_attributes": {
                        "name": "polygon",
                        "all_points_x": [10, 60, 60, 10],
                        "all_points_y": [20, 20, 90, 90],
                    },
                    "region_attributes": {"label": "bottle"},
                },
                {
                    "shape_attributes": {
                        "name": "polygon",
                        "all_points_x": [100, 180, 140],
                        "all_points_y": [30, 30, 120],
                    },
                    "region_attributes": {"label": "bottle"},
                },
            ],
            "file_attributes": {},
        },
        "img_b.jpg456": {
            "filename": "img_b.jpg",
            "size": 456,
            "regions": [],
            "file_attributes": {},
        },
        "img_c.jpg789": {
            "filename": "img_c.jpg",
            "size": 789,
            "regions": [
                {
                    "shape_attributes": {
                        "name": "polygon",
                        "all_points_x": [4, 30, 30, 4],
                        "all_points_y": [6, 6, 40, 40],
                    },
                    "region_attributes": {"label": "bottle"},
                },
            ],
            "file_attributes": {},
        },
    },
    "_via_attributes": {},
}

DIMS_MANIFEST = "img_a.jpg 150 225\nimg_b.jpg 2448 3264\nimg_c.jpg 64 48\n"


def perfect_results(coco_doc: dict) -> list[dict]:
    """COCO results mirroring the ground truth exactly, all scores 1.0."""
    return [
        {
            "image_id": ann["image_id"],
            "category_id": ann["category_id"],
            "score": 1.0,
            "segmentation": ann["segmentation"],
        }
        for ann in coco_doc["annotations"]
    ]


def scored_results(coco_doc: dict) -> list[dict]:
    """Same regions with spread-out scores, for confidence sweeps."""
    scores = [0.95, 0.8, 0.55]
    return [
        {
            "image_id": ann["image_id"],
            "category_id": ann["category_id"],
            "score": scores[i % len(scores)],
            "segmentation": ann["segmentation"],
        }
        for i, ann in enumerate(coco_doc["annotations"])
    ]


@pytest.fixture
def corpus(tmp_path):
    """Write the VIA project and dimension manifest; return their paths."""
    via_path = tmp_path / "project_via.json"
    via_path.write_text(json.dumps(VIA_PROJECT))
    dims_path = tmp_path / "dims.txt"
    dims_path.write_text(DIMS_MANIFEST)
    return {"via": via_path, "dims": dims_path, "root": tmp_path}
