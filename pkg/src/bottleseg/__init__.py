"""Waste-bottle instance-segmentation toolkit.

Annotation conversion (VIA to COCO), mask and box geometry, square-pad
preprocessing transforms, detection kernels (NMS, confidence filtering,
RoIAlign), the COCO mAP evaluation protocol, and staged transfer-learning
plans.
"""

from .annotation_io import (
    CocoImport,
    DatasetRecord,
    DatasetStats,
    Instance,
    ViaRegion,
    dataset_stats,
    export_coco,
    import_coco,
    parse_via,
    read_dimension_manifest,
)
from .detection_kernels import Roi, ScoredBox, cap_detections, confidence_filter, nms, roi_align
from .errors import InputError
from .evaluation import (
    DetectionInstance,
    EvalParams,
    EvalSummary,
    GroundTruthInstance,
    MatchOutcome,
    SweepRow,
    average_precision,
    confidence_sweep,
    evaluate,
    match_instances,
    read_detections,
)
from .geometry import (
    BBox,
    Polygon,
    RleMask,
    bbox_from_mask,
    bbox_iou,
    mask_area,
    mask_iou,
    rasterize_polygon,
    rasterize_polygons,
    rle_decode,
    rle_encode,
)
from .preprocess import SquarePadTransform, compute_square_pad, flip_horizontal, transform_polygon
from .schedule import (
    BASE,
    PlanHyper,
    TrainingStage,
    TransferPlan,
    builtin_paper_plan,
    emit_config,
    parse_plan,
    serialize_plan,
    validate_plan,
)

__all__ = [
    "BASE",
    "BBox",
    "CocoImport",
    "DatasetRecord",
    "DatasetStats",
    "DetectionInstance",
    "EvalParams",
    "EvalSummary",
    "GroundTruthInstance",
    "InputError",
    "Instance",
    "MatchOutcome",
    "PlanHyper",
    "Polygon",
    "RleMask",
    "Roi",
    "ScoredBox",
    "SquarePadTransform",
    "SweepRow",
    "TrainingStage",
    "TransferPlan",
    "ViaRegion",
    "average_precision",
    "bbox_from_mask",
    "bbox_iou",
    "builtin_paper_plan",
    "cap_detections",
    "confidence_filter",
    "confidence_sweep",
    "compute_square_pad",
    "dataset_stats",
    "emit_config",
    "evaluate",
    "export_coco",
    "flip_horizontal",
    "import_coco",
    "mask_area",
    "mask_iou",
    "match_instances",
    "nms",
    "parse_plan",
    "parse_via",
    "rasterize_polygon",
    "rasterize_polygons",
    "read_detections",
    "read_dimension_manifest",
    "rle_decode",
    "rle_encode",
    "roi_align",
    "serialize_plan",
    "transform_polygon",
    "validate_plan",
]

__version__ = "0.1.0"
