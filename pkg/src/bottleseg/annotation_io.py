"""VIA annotation parsing, COCO-format export/import, and dataset statistics.

Pixel data never enters this module: image dimensions are supplied
out-of-band through a dimension manifest because VIA exports do not store
them reliably.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import InputError
from .geometry import (
    BBox,
    Polygon,
    RleMask,
    bbox_from_mask,
    mask_area,
    rasterize_polygons,
    rle_decode,
    rle_encode,
)

DEFAULT_CATEGORY = "bottle"


@dataclass(frozen=True)
class ViaRegion:
    """One raw VIA region: polygon vertex lists plus free-form attributes."""

    shape_name: str
    all_points_x: tuple[float, ...]
    all_points_y: tuple[float, ...]
    region_attributes: Mapping[str, str]


@dataclass(frozen=True)
class Instance:
    """One annotated object: a polygon region (possibly multi-part) or an RLE mask."""

    category: str
    polygons: tuple[Polygon, ...] = ()
    rle: RleMask | None = None
    is_ignore: bool = False

    def __post_init__(self):
        if not self.polygons and self.rle is None:
            raise ValueError("instance needs polygons or an rle mask")

    def to_mask(self, height: int, width: int) -> np.ndarray:
        """Rasterize the region onto a height x width grid."""
        if self.rle is not None:
            if (self.rle.height, self.rle.width) != (height, width):
                raise ValueError(
                    f"rle dims {self.rle.height}x{self.rle.width} do not match "
                    f"image dims {height}x{width}"
                )
            return rle_decode(self.rle)
        return rasterize_polygons(self.polygons, height, width)


@dataclass(frozen=True)
class DatasetRecord:
    """One image with its instances; the annotation interchange unit."""

    image_id: int
    file_name: str
    height: int
    width: int
    instances: tuple[Instance, ...] = ()

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"image dims must be >= 1, got {self.height}x{self.width}")


@dataclass(frozen=True)
class DatasetStats:
    num_images: int
    num_annotated_images: int
    total_instances: int
    min_pixel_area: int
    max_pixel_area: int
    per_category: dict[str, int] = field(default_factory=dict)


class CocoImport(NamedTuple):
    """Parsed COCO dataset: the records plus the category names in id order."""

    records: list[DatasetRecord]
    category_names: list[str]


def read_dimension_manifest(text: str) -> dict[str, tuple[int, int]]:
    """Parse the flat ``file_name height width`` manifest, one image per line.

    File names may contain spaces; the two final whitespace-separated
    fields are the dimensions.
    """
    dims: dict[str, tuple[int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.rsplit(None, 2)
        if len(parts) != 3:
            raise InputError("expected 'file_name height width'", location=f"line {lineno}")
        name, h_str, w_str = parts
        try:
            height, width = int(h_str), int(w_str)
        except ValueError:
            raise InputError(
                f"dimensions must be integers, got {h_str!r} {w_str!r}",
                location=f"line {lineno}",
            ) from None
        if height < 1 or width < 1:
            raise InputError(f"dimensions must be >= 1, got {height}x{width}", location=f"line {lineno}")
        dims[name] = (height, width)
    return dims


def _load_json(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(
            f"malformed {what}: {exc.msg}",
            location=f"line {exc.lineno} column {exc.colno}",
        ) from None


def _region_category(
    attrs: Mapping[str, object],
    label_key: str | None,
    default_category: str,
    image_name: str,
    region_index: int,
) -> str:
    where = f"image '{image_name}' region {region_index}"
    if label_key is not None:
        if label_key not in attrs:
            raise InputError(f"{where}: missing region attribute {label_key!r}")
        return str(attrs[label_key])
    if not attrs:
        return default_category
    if len(attrs) == 1:
        return str(next(iter(attrs.values())))
    raise InputError(
        f"{where}: multiple region attributes {sorted(attrs)}; pass label_key to pick one"
    )


def parse_via(
    project_text: str,
    image_dims: Mapping[str, tuple[int, int]],
    label_key: str | None = None,
    default_category: str = DEFAULT_CATEGORY,
) -> list[DatasetRecord]:
    """Parse a VIA 2.x project or annotation export into dataset records.

    ``image_dims`` maps file_name to (height, width); every annotated image
    must have an entry. Polygon vertices are clamped to the image
    rectangle. Images without regions become records with empty instance
    lists. Image ids are assigned 1-based in document order.
    """
    doc = _load_json(project_text, "VIA document")
    if not isinstance(doc, dict):
        raise InputError("VIA document must be a JSON object")
    metadata = doc.get("_via_img_metadata", doc)
    if not isinstance(metadata, dict):
        raise InputError("'_via_img_metadata' must be a JSON object")

    records: list[DatasetRecord] = []
    for image_id, (key, entry) in enumerate(metadata.items(), start=1):
        if not isinstance(entry, dict) or "filename" not in entry:
            raise InputError(f"entry {key!r} is not a VIA image record (missing 'filename')")
        file_name = str(entry["filename"])
        if file_name not in image_dims:
            raise InputError(f"no dimensions for image '{file_name}' in the manifest")
        height, width = image_dims[file_name]
        regions = entry.get("regions", [])
        if not isinstance(regions, list):
            raise InputError(f"image '{file_name}': 'regions' must be a list")
        instances = []
        for idx, region in enumerate(regions):
            shape = region.get("shape_attributes", {}) if isinstance(region, dict) else {}
            name = shape.get("name")
            if name != "polygon":
                raise InputError(
                    f"image '{file_name}' region {idx}: shape {name!r} is not supported "
                    "(polygon only)"
                )
            xs = shape.get("all_points_x")
            ys = shape.get("all_points_y")
            if not isinstance(xs, list) or not isinstance(ys, list) or len(xs) != len(ys):
                raise InputError(
                    f"image '{file_name}' region {idx}: all_points_x/all_points_y "
                    "must be lists of equal length"
                )
            if len(xs) < 3:
                raise InputError(
                    f"image '{file_name}' region {idx}: polygon needs at least 3 points, "
                    f"got {len(xs)}"
                )
            category = _region_category(
                region.get("region_attributes", {}), label_key, default_category, file_name, idx
            )
            verts = tuple(
                (min(max(x, 0), width), min(max(y, 0), height)) for x, y in zip(xs, ys)
            )
            try:
                polygon = Polygon(verts)
            except ValueError as exc:
                raise InputError(f"image '{file_name}' region {idx}: {exc}") from None
            instances.append(Instance(category=category, polygons=(polygon,)))
        records.append(
            DatasetRecord(
                image_id=image_id,
                file_name=file_name,
                height=height,
                width=width,
                instances=tuple(instances),
            )
        )
    return records


def _segmentation_for(instance: Instance):
    if instance.rle is not None:
        return {
            "size": [instance.rle.height, instance.rle.width],
            "counts": list(instance.rle.counts),
        }
    return [[coord for vertex in poly.vertices for coord in vertex] for poly in instance.polygons]


def export_coco(records: Sequence[DatasetRecord], category_names: Sequence[str]) -> str:
    """Serialize records as a COCO dataset document.

    Category ids are 1-based positions in ``category_names``. Annotation
    ids are dense and deterministic: records sorted by image_id, instances
    in input order. Each annotation's area and bbox are measured on the
    rasterized segmentation.
    """
    category_ids = {name: i + 1 for i, name in enumerate(category_names)}
    if len(category_ids) != len(category_names):
        raise ValueError("category names must be unique")
    seen: set[int] = set()
    for record in records:
        if record.image_id in seen:
            raise ValueError(f"duplicate image_id {record.image_id}")
        seen.add(record.image_id)

    images = [
        {
            "id": r.image_id,
            "file_name": r.file_name,
            "height": r.height,
            "width": r.width,
        }
        for r in sorted(records, key=lambda r: r.image_id)
    ]
    annotations = []
    ann_id = 1
    for record in sorted(records, key=lambda r: r.image_id):
        for instance in record.instances:
            if instance.category not in category_ids:
                raise ValueError(f"unknown category {instance.category!r}")
            mask = rle_encode(instance.to_mask(record.height, record.width))
            box = bbox_from_mask(mask)
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": record.image_id,
                    "category_id": category_ids[instance.category],
                    "segmentation": _segmentation_for(instance),
                    "area": mask_area(mask),
                    "bbox": [box.x, box.y, box.w, box.h],
                    "iscrowd": 1 if instance.is_ignore else 0,
                }
            )
            ann_id += 1
    categories = [{"id": i + 1, "name": name} for i, name in enumerate(category_names)]
    doc = {"images": images, "annotations": annotations, "categories": categories}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _parse_segmentation(seg, image_name: str, height: int, width: int):
    """Return (polygons, rle) for one annotation's segmentation field."""
    if isinstance(seg, dict):
        size = seg.get("size")
        counts = seg.get("counts")
        if not isinstance(size, list) or len(size) != 2 or not isinstance(counts, list):
            raise InputError(f"image '{image_name}': malformed RLE segmentation")
        if tuple(size) != (height, width):
            raise InputError(
                f"image '{image_name}': RLE size {size} does not match image dims "
                f"[{height}, {width}]"
            )
        try:
            return (), RleMask(size[0], size[1], tuple(counts))
        except (ValueError, TypeError) as exc:
            raise InputError(f"image '{image_name}': bad RLE counts: {exc}") from None
    if isinstance(seg, list):
        polygons = []
        for part in seg:
            if not isinstance(part, list) or len(part) < 6 or len(part) % 2 != 0:
                raise InputError(
                    f"image '{image_name}': polygon segmentation must be flat "
                    "[x1, y1, ...] lists with at least 3 points"
                )
            verts = tuple(zip(part[0::2], part[1::2]))
            try:
                polygons.append(Polygon(verts))
            except ValueError as exc:
                raise InputError(f"image '{image_name}': {exc}") from None
        return tuple(polygons), None
    raise InputError(f"image '{image_name}': unsupported segmentation type {type(seg).__name__}")


def import_coco(document: str) -> CocoImport:
    """Parse a COCO dataset document back into records plus category names.

    Inverse of :func:`export_coco` up to polygon representation:
    export -> import -> export is byte-identical.
    """
    doc = _load_json(document, "COCO document")
    if not isinstance(doc, dict):
        raise InputError("COCO document must be a JSON object")
    for key in ("images", "annotations", "categories"):
        if not isinstance(doc.get(key), list):
            raise InputError(f"COCO document needs a top-level {key!r} array")

    categories_by_id: dict[int, str] = {}
    for cat in doc["categories"]:
        if not isinstance(cat, dict) or "id" not in cat or "name" not in cat:
            raise InputError("each category needs 'id' and 'name'")
        categories_by_id[int(cat["id"])] = str(cat["name"])
    category_names = [categories_by_id[i] for i in sorted(categories_by_id)]

    images: dict[int, dict] = {}
    image_order: list[int] = []
    for img in doc["images"]:
        if not isinstance(img, dict) or not {"id", "file_name", "height", "width"} <= img.keys():
            raise InputError("each image needs 'id', 'file_name', 'height', 'width'")
        image_id = int(img["id"])
        if image_id in images:
            raise InputError(f"duplicate image id {image_id}")
        images[image_id] = img
        image_order.append(image_id)

    instances_by_image: dict[int, list[tuple[int, Instance]]] = {i: [] for i in image_order}
    for ann in doc["annotations"]:
        if not isinstance(ann, dict) or not {"id", "image_id", "category_id"} <= ann.keys():
            raise InputError("each annotation needs 'id', 'image_id', 'category_id'")
        image_id = int(ann["image_id"])
        if image_id not in images:
            raise InputError(f"annotation {ann['id']} references missing image {image_id}")
        cat_id = int(ann["category_id"])
        if cat_id not in categories_by_id:
            raise InputError(f"annotation {ann['id']} references missing category {cat_id}")
        img = images[image_id]
        polygons, rle = _parse_segmentation(
            ann.get("segmentation"), str(img["file_name"]), int(img["height"]), int(img["width"])
        )
        instance = Instance(
            category=categories_by_id[cat_id],
            polygons=polygons,
            rle=rle,
            is_ignore=bool(ann.get("iscrowd", 0)),
        )
        instances_by_image[image_id].append((int(ann["id"]), instance))

    records = []
    for image_id in image_order:
        img = images[image_id]
        ordered = [inst for _, inst in sorted(instances_by_image[image_id], key=lambda p: p[0])]
        records.append(
            DatasetRecord(
                image_id=image_id,
                file_name=str(img["file_name"]),
                height=int(img["height"]),
                width=int(img["width"]),
                instances=tuple(ordered),
            )
        )
    return CocoImport(records, category_names)


def dataset_stats(records: Sequence[DatasetRecord]) -> DatasetStats:
    """Dataset-level statistics: image and instance counts, pixel-area range."""
    per_category: dict[str, int] = {}
    total = 0
    annotated = 0
    for record in records:
        if record.instances:
            annotated += 1
        for instance in record.instances:
            total += 1
            per_category[instance.category] = per_category.get(instance.category, 0) + 1
    areas = [r.height * r.width for r in records]
    return DatasetStats(
        num_images=len(records),
        num_annotated_images=annotated,
        total_instances=total,
        min_pixel_area=min(areas) if areas else 0,
        max_pixel_area=max(areas) if areas else 0,
        per_category=dict(sorted(per_category.items())),
    )
