"""COCO-protocol detection evaluation: greedy matching, 101-point AP, summaries.

The protocol follows the reference COCO metric: per image and category,
detections are greedily matched to the unmatched ground truth of highest
IoU at or above the threshold (ignore regions only as a fallback, and
without being consumed); pooled detections then yield an interpolated
precision/recall curve sampled at the 101 recall points 0.00..1.00. The
reported mAP is the mean AP over the thresholds 0.50:0.05:0.95.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .annotation_io import DatasetRecord
from .detection_kernels import cap_detections, confidence_filter
from .errors import InputError
from .geometry import (
    BBox,
    Polygon,
    RleMask,
    bbox_from_mask,
    mask_iou,
    rasterize_polygons,
    rle_encode,
)

TP = "tp"
FP = "fp"
IGNORED = "ignored"

MODE_MASK = "mask"
MODE_BBOX = "bbox"

DEFAULT_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class DetectionInstance:
    """A predicted instance to be scored: mask and/or box, score, category."""

    image_id: int
    category: str
    score: float
    mask: RleMask | None = None
    bbox: BBox | None = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.mask is None and self.bbox is None:
            raise ValueError("detection needs a mask or a bbox region")


@dataclass(frozen=True)
class GroundTruthInstance:
    """A ground-truth instance prepared for matching."""

    image_id: int
    category: str
    mask: RleMask | None = None
    bbox: BBox | None = None
    is_ignore: bool = False

    def __post_init__(self):
        if self.mask is None and self.bbox is None:
            raise ValueError("ground truth needs a mask or a bbox region")


@dataclass(frozen=True)
class EvalParams:
    """Evaluation configuration: IoU thresholds, per-image cap, mode, confidence."""

    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS
    max_detections_per_image: int = 512
    mode: str = MODE_MASK
    min_confidence: float = 0.0

    def __post_init__(self):
        thresholds = tuple(self.iou_thresholds)
        if not thresholds:
            raise ValueError("need at least one IoU threshold")
        for t in thresholds:
            if not 0.0 < t <= 1.0:
                raise ValueError(f"IoU thresholds must be in (0, 1], got {t}")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("IoU thresholds must be strictly increasing")
        if self.max_detections_per_image < 1:
            raise ValueError("max_detections_per_image must be >= 1")
        if self.mode not in (MODE_MASK, MODE_BBOX):
            raise ValueError(f"mode must be '{MODE_MASK}' or '{MODE_BBOX}', got {self.mode!r}")
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ValueError(f"min_confidence must be in [0, 1], got {self.min_confidence}")
        object.__setattr__(self, "iou_thresholds", thresholds)


@dataclass(frozen=True)
class ImageCounts:
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalSummary:
    """AP per threshold plus the AP50/AP75/AP90 and mAP[0.5:0.95:0.05] report."""

    ap_per_threshold: dict[float, float]
    ap50: float | None
    ap75: float | None
    ap90: float | None
    map_coco: float
    counts_per_threshold: dict[float, dict[int, ImageCounts]] = field(default_factory=dict)


@dataclass(frozen=True)
class MatchOutcome:
    """Per-detection labels for one image and category at one threshold."""

    labels: tuple[str, ...]
    matched_gt: tuple[int | None, ...]
    num_non_ignore_gts: int

    @property
    def tp_count(self) -> int:
        return sum(1 for lab in self.labels if lab == TP)

    @property
    def fp_count(self) -> int:
        return sum(1 for lab in self.labels if lab == FP)

    @property
    def fn_count(self) -> int:
        return self.num_non_ignore_gts - self.tp_count


@dataclass(frozen=True)
class SweepRow:
    confidence: float
    map_coco: float
    ap50: float | None
    detection_count: int


def _bbox_overlap(det: BBox, gt: BBox, gt_is_ignore: bool) -> float:
    """Box IoU, or intersection over detection area for ignore ground truths."""
    ix = min(det.x + det.w, gt.x + gt.w) - max(det.x, gt.x)
    iy = min(det.y + det.h, gt.y + gt.h) - max(det.y, gt.y)
    inter = ix * iy if ix > 0 and iy > 0 else 0.0
    denom = det.area if gt_is_ignore else det.area + gt.area - inter
    if denom <= 0:
        return 0.0
    return inter / denom


def region_iou(det: DetectionInstance, gt: GroundTruthInstance, mode: str) -> float:
    """IoU between a detection and a ground truth in the requested mode."""
    if mode == MODE_MASK:
        if det.mask is None:
            raise ValueError("mask mode needs mask regions on every detection")
        if gt.mask is None:
            raise ValueError("mask mode needs mask regions on every ground truth")
        return mask_iou(det.mask, gt.mask, b_is_ignore=gt.is_ignore)
    if det.bbox is None:
        raise ValueError("bbox mode needs bbox regions on every detection")
    if gt.bbox is None:
        raise ValueError("bbox mode needs bbox regions on every ground truth")
    return _bbox_overlap(det.bbox, gt.bbox, gt.is_ignore)


def match_instances(
    gts: Sequence[GroundTruthInstance],
    dts: Sequence[DetectionInstance],
    iou_threshold: float,
    mode: str = MODE_MASK,
) -> MatchOutcome:
    """Greedily match detections to ground truths of one image and category.

    ``dts`` must already be sorted by descending score (ties by input
    order). Each detection takes the unmatched non-ignore ground truth of
    highest IoU >= threshold (ties broken by ground-truth input order); if
    none qualifies it may fall back to an ignore region, which excludes it
    from scoring and is never consumed. Unmatched non-ignore ground truths
    count as false negatives.
    """
    ids = {g.image_id for g in gts} | {d.image_id for d in dts}
    if len(ids) > 1:
        raise ValueError(f"mixed image ids {sorted(ids)}")
    cats = {g.category for g in gts} | {d.category for d in dts}
    if len(cats) > 1:
        raise ValueError(f"mixed categories {sorted(cats)}")

    # Non-ignore ground truths are scanned first so a qualifying real match
    # always beats an ignore match; both scans keep input order.
    gt_order = sorted(range(len(gts)), key=lambda i: gts[i].is_ignore)
    consumed = [False] * len(gts)
    labels: list[str] = []
    matched: list[int | None] = []
    for det in dts:
        best = -1
        best_iou = -1.0
        for gi in gt_order:
            gt = gts[gi]
            if consumed[gi] and not gt.is_ignore:
                continue
            if best >= 0 and not gts[best].is_ignore and gt.is_ignore:
                break
            iou = region_iou(det, gt, mode)
            if iou < iou_threshold:
                continue
            if iou > best_iou:
                best_iou = iou
                best = gi
        if best < 0:
            labels.append(FP)
            matched.append(None)
        elif gts[best].is_ignore:
            labels.append(IGNORED)
            matched.append(best)
        else:
            consumed[best] = True
            labels.append(TP)
            matched.append(best)
    num_real = sum(1 for g in gts if not g.is_ignore)
    return MatchOutcome(tuple(labels), tuple(matched), num_real)


def average_precision(
    scored_labels: Sequence[tuple[float, str]], num_non_ignore_gts: int
) -> float:
    """101-point interpolated AP from pooled per-detection match labels.

    ``scored_labels`` holds (score, label) pairs pooled across images;
    ignored detections are dropped. The pool is stably sorted by descending
    score (ties keep pool order), the precision curve is made monotone
    non-increasing from the right, and AP is the mean of the envelope
    sampled at recalls 0.00, 0.01, ..., 1.00 (0 where a recall is never
    reached). With no non-ignore ground truths AP is defined as 0.
    """
    if num_non_ignore_gts <= 0:
        return 0.0
    entries = [(score, label) for score, label in scored_labels if label != IGNORED]
    entries.sort(key=lambda e: -e[0])
    recalls: list[float] = []
    precisions: list[float] = []
    tp = fp = 0
    for _, label in entries:
        if label == TP:
            tp += 1
        else:
            fp += 1
        recalls.append(tp / num_non_ignore_gts)
        precisions.append(tp / (tp + fp))
    for i in range(len(precisions) - 2, -1, -1):
        if precisions[i + 1] > precisions[i]:
            precisions[i] = precisions[i + 1]
    total = 0.0
    j = 0
    for k in range(101):
        r = k / 100
        while j < len(recalls) and recalls[j] < r:
            j += 1
        if j < len(recalls):
            total += precisions[j]
    return total / 101


@dataclass(frozen=True)
class _Indexed:
    """Pairs a detection with its position in the original input list."""

    score: float
    index: int
    det: DetectionInstance


def gt_instances_from_records(records: Sequence[DatasetRecord]) -> list[GroundTruthInstance]:
    """Flatten dataset records into matchable ground-truth instances."""
    gts = []
    for record in records:
        for instance in record.instances:
            mask = rle_encode(instance.to_mask(record.height, record.width))
            gts.append(
                GroundTruthInstance(
                    image_id=record.image_id,
                    category=instance.category,
                    mask=mask,
                    bbox=bbox_from_mask(mask),
                    is_ignore=instance.is_ignore,
                )
            )
    return gts


def _check_detections(
    records_by_id: Mapping[int, DatasetRecord],
    detections: Sequence[DetectionInstance],
    mode: str,
) -> None:
    for det in detections:
        if det.image_id not in records_by_id:
            raise ValueError(f"detection references unknown image id {det.image_id}")
        record = records_by_id[det.image_id]
        if mode == MODE_MASK:
            if det.mask is None:
                raise ValueError(
                    f"mask mode but detection on image {det.image_id} has no mask region"
                )
            if (det.mask.height, det.mask.width) != (record.height, record.width):
                raise ValueError(
                    f"detection mask dims {det.mask.height}x{det.mask.width} do not match "
                    f"image {det.image_id} dims {record.height}x{record.width}"
                )
        elif det.bbox is None:
            raise ValueError(
                f"bbox mode but detection on image {det.image_id} has no bbox region"
            )


def _select_detections(
    records: Sequence[DatasetRecord],
    detections: Sequence[DetectionInstance],
    params: EvalParams,
) -> dict[int, list[_Indexed]]:
    """Confidence-filter then cap detections per image; survivors keep their
    original input index and come out in descending-score order."""
    records_by_id = {r.image_id: r for r in records}
    _check_detections(records_by_id, detections, params.mode)
    by_image: dict[int, list[_Indexed]] = {r.image_id: [] for r in records}
    for index, det in enumerate(detections):
        by_image[det.image_id].append(_Indexed(det.score, index, det))
    return {
        image_id: cap_detections(
            confidence_filter(dets, params.min_confidence),
            params.max_detections_per_image,
        )
        for image_id, dets in by_image.items()
    }


def evaluate(
    records: Sequence[DatasetRecord],
    detections: Sequence[DetectionInstance],
    params: EvalParams = EvalParams(),
) -> EvalSummary:
    """Run the full evaluation protocol and summarize AP across thresholds.

    Detections are confidence-filtered and capped per image, matched per
    image and category at every threshold, and pooled per category into
    101-point APs; the per-threshold AP is the mean over categories (a
    category with no ground truths scores 0 once it has detections, and is
    skipped entirely when it has neither).
    """
    selected = _select_detections(records, detections, params)
    gts = gt_instances_from_records(records)

    gt_by_image_cat: dict[tuple[int, str], list[GroundTruthInstance]] = {}
    for gt in gts:
        gt_by_image_cat.setdefault((gt.image_id, gt.category), []).append(gt)
    dt_by_image_cat: dict[tuple[int, str], list[_Indexed]] = {}
    for image_id, dets in selected.items():
        for item in dets:
            dt_by_image_cat.setdefault((image_id, item.det.category), []).append(item)

    categories = sorted(
        {cat for _, cat in gt_by_image_cat} | {cat for _, cat in dt_by_image_cat}
    )
    image_ids = sorted(r.image_id for r in records)
    gts_per_category = {
        cat: sum(
            1
            for gt in gts
            if gt.category == cat and not gt.is_ignore
        )
        for cat in categories
    }

    ap_per_threshold: dict[float, float] = {}
    counts_per_threshold: dict[float, dict[int, ImageCounts]] = {}
    for threshold in params.iou_thresholds:
        pooled: dict[str, list[tuple[int, float, str]]] = {cat: [] for cat in categories}
        counts = {image_id: [0, 0, 0] for image_id in image_ids}
        for image_id in image_ids:
            for cat in categories:
                cat_gts = gt_by_image_cat.get((image_id, cat), [])
                cat_dts = dt_by_image_cat.get((image_id, cat), [])
                if not cat_gts and not cat_dts:
                    continue
                outcome = match_instances(
                    cat_gts, [item.det for item in cat_dts], threshold, params.mode
                )
                for item, label in zip(cat_dts, outcome.labels):
                    pooled[cat].append((item.index, item.score, label))
                counts[image_id][0] += outcome.tp_count
                counts[image_id][1] += outcome.fp_count
                counts[image_id][2] += outcome.fn_count
        aps = []
        for cat in categories:
            entries = [(score, label) for _, score, label in sorted(pooled[cat])]
            aps.append(average_precision(entries, gts_per_category[cat]))
        ap_per_threshold[threshold] = sum(aps) / len(aps) if aps else 0.0
        counts_per_threshold[threshold] = {
            image_id: ImageCounts(*vals) for image_id, vals in counts.items()
        }

    ap_values = list(ap_per_threshold.values())
    map_coco = sum(ap_values) / len(ap_values)
    return EvalSummary(
        ap_per_threshold=ap_per_threshold,
        ap50=_lookup_ap(ap_per_threshold, 0.50),
        ap75=_lookup_ap(ap_per_threshold, 0.75),
        ap90=_lookup_ap(ap_per_threshold, 0.90),
        map_coco=map_coco,
        counts_per_threshold=counts_per_threshold,
    )


def _lookup_ap(ap_per_threshold: Mapping[float, float], threshold: float) -> float | None:
    for t, ap in ap_per_threshold.items():
        if abs(t - threshold) < 1e-9:
            return ap
    return None


def confidence_sweep(
    records: Sequence[DatasetRecord],
    detections: Sequence[DetectionInstance],
    params: EvalParams,
    confidences: Sequence[float],
) -> list[SweepRow]:
    """Evaluate once per confidence with min_confidence overridden."""
    rows = []
    for confidence in confidences:
        if not 0.0 <= confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {confidence}")
        run_params = dataclasses.replace(params, min_confidence=confidence)
        summary = evaluate(records, detections, run_params)
        selected = _select_detections(records, detections, run_params)
        rows.append(
            SweepRow(
                confidence=confidence,
                map_coco=summary.map_coco,
                ap50=summary.ap50,
                detection_count=sum(len(v) for v in selected.values()),
            )
        )
    return rows


def read_detections(
    document: str,
    records: Sequence[DatasetRecord],
    category_names: Sequence[str],
) -> list[DetectionInstance]:
    """Parse a COCO results array into detection instances.

    Each entry carries image_id, category_id, score, and a segmentation
    (RLE dict or polygon lists, rasterized at the image dimensions) and/or
    a bbox [x, y, w, h]. Entries keep their array order.
    """
    doc = _load_results_json(document)
    records_by_id = {r.image_id: r for r in records}
    detections = []
    for pos, entry in enumerate(doc):
        where = f"result {pos}"
        if not isinstance(entry, dict):
            raise InputError(f"{where}: must be an object")
        try:
            image_id = int(entry["image_id"])
            category_id = int(entry["category_id"])
            score = float(entry["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{where}: needs image_id, category_id, score ({exc})") from None
        if image_id not in records_by_id:
            raise InputError(f"{where}: unknown image id {image_id}")
        if not 1 <= category_id <= len(category_names):
            raise InputError(f"{where}: category id {category_id} out of range")
        if not 0.0 <= score <= 1.0:
            raise InputError(f"{where}: score {score} outside [0, 1]")
        record = records_by_id[image_id]
        mask = None
        bbox = None
        if "segmentation" in entry:
            polygons, rle = _results_segmentation(entry["segmentation"], where, record)
            mask = rle if rle is not None else rle_encode(
                rasterize_polygons(polygons, record.height, record.width)
            )
        if "bbox" in entry:
            raw = entry["bbox"]
            if not isinstance(raw, list) or len(raw) != 4:
                raise InputError(f"{where}: bbox must be [x, y, w, h]")
            try:
                bbox = BBox(*(float(v) for v in raw))
            except (TypeError, ValueError) as exc:
                raise InputError(f"{where}: bad bbox: {exc}") from None
        if mask is None and bbox is None:
            raise InputError(f"{where}: needs a segmentation or a bbox")
        detections.append(
            DetectionInstance(
                image_id=image_id,
                category=category_names[category_id - 1],
                score=score,
                mask=mask,
                bbox=bbox,
            )
        )
    return detections


def _load_results_json(document: str):
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise InputError(
            f"malformed results document: {exc.msg}",
            location=f"line {exc.lineno} column {exc.colno}",
        ) from None
    if not isinstance(doc, list):
        raise InputError("results document must be a JSON array")
    return doc


def _results_segmentation(seg, where: str, record: DatasetRecord):
    if isinstance(seg, dict):
        size = seg.get("size")
        counts = seg.get("counts")
        if not isinstance(size, list) or len(size) != 2 or not isinstance(counts, list):
            raise InputError(f"{where}: malformed RLE segmentation")
        if tuple(size) != (record.height, record.width):
            raise InputError(
                f"{where}: RLE size {size} does not match image dims "
                f"[{record.height}, {record.width}]"
            )
        try:
            return (), RleMask(size[0], size[1], tuple(counts))
        except (ValueError, TypeError) as exc:
            raise InputError(f"{where}: bad RLE counts: {exc}") from None
    if isinstance(seg, list):
        polygons = []
        for part in seg:
            if not isinstance(part, list) or len(part) < 6 or len(part) % 2 != 0:
                raise InputError(f"{where}: polygon segmentation must be flat [x1, y1, ...] lists")
            try:
                polygons.append(Polygon(tuple(zip(part[0::2], part[1::2]))))
            except ValueError as exc:
                raise InputError(f"{where}: {exc}") from None
        return tuple(polygons), None
    raise InputError(f"{where}: unsupported segmentation type {type(seg).__name__}")


def format_summary_table(summary: EvalSummary) -> str:
    """Flat AP50/AP75/AP90/mAP table, values scaled x100 with two decimals."""
    header = f"{'AP50':>8} {'AP75':>8} {'AP90':>8} {'mAP':>8}"
    row = " ".join(
        f"{_scaled(v):>8}" for v in (summary.ap50, summary.ap75, summary.ap90, summary.map_coco)
    )
    return f"{header}\n{row}\n"


def format_sweep_table(rows: Sequence[SweepRow]) -> str:
    """Confidence sweep table: one row per confidence, Table-style scaling."""
    lines = [f"{'confidence':>10} {'mAP':>8} {'AP50':>8} {'detections':>10}"]
    for row in rows:
        lines.append(
            f"{_percent(row.confidence):>10} {_scaled(row.map_coco):>8} "
            f"{_scaled(row.ap50):>8} {row.detection_count:>10}"
        )
    return "\n".join(lines) + "\n"


def _scaled(value: float | None) -> str:
    return "n/a" if value is None else f"{value * 100:.2f}"


def _percent(value: float) -> str:
    return f"{value * 100:g}%"


def summary_to_dict(summary: EvalSummary) -> dict:
    """Machine-readable mirror of EvalSummary (raw ratios, keys sorted stably)."""
    return {
        "ap_per_threshold": {f"{t:.2f}": ap for t, ap in sorted(summary.ap_per_threshold.items())},
        "ap50": summary.ap50,
        "ap75": summary.ap75,
        "ap90": summary.ap90,
        "map_coco": summary.map_coco,
        "counts_per_threshold": {
            f"{t:.2f}": {
                str(image_id): {"tp": c.tp, "fp": c.fp, "fn": c.fn}
                for image_id, c in sorted(images.items())
            }
            for t, images in sorted(summary.counts_per_threshold.items())
        },
    }


def sweep_to_dicts(rows: Sequence[SweepRow]) -> list[dict]:
    return [
        {
            "confidence": row.confidence,
            "map_coco": row.map_coco,
            "ap50": row.ap50,
            "detection_count": row.detection_count,
        }
        for row in rows
    ]
