"""Command-line interface: convert, stats, evaluate, sweep, plan, kernel.

Exit codes: 0 success, 1 validation findings, 2 usage error, 3 input
error (malformed or inconsistent files, with file and location on
stderr). Commands only read their inputs and write only to --out paths;
identical invocations on identical files produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import annotation_io, evaluation, preprocess, schedule
from .detection_kernels import roi_align
from .errors import InputError

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_INPUT = 3


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write_text(path: str, text: str) -> None:
    Path(path).write_text(text)


def _located(exc: InputError, path: str) -> InputError:
    return InputError(str(exc), location=path)


def cmd_convert(args: argparse.Namespace) -> int:
    dims_text = _read_text(args.dims)
    via_text = _read_text(args.via)
    try:
        dims = annotation_io.read_dimension_manifest(dims_text)
    except InputError as exc:
        raise _located(exc, args.dims)
    try:
        records = annotation_io.parse_via(
            via_text, dims, label_key=args.label_key, default_category=args.default_category
        )
    except InputError as exc:
        raise _located(exc, args.via)
    if args.categories:
        categories = [c for c in args.categories.split(",") if c]
    else:
        categories = sorted({i.category for r in records for i in r.instances})
        if not categories:
            categories = [args.default_category]
    try:
        document = annotation_io.export_coco(records, categories)
    except ValueError as exc:
        raise InputError(str(exc), location=args.via) from None
    _write_text(args.out, document)
    total = sum(len(r.instances) for r in records)
    print(f"wrote {args.out}: {len(records)} images, {total} annotations, "
          f"{len(categories)} categories")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        records, _ = annotation_io.import_coco(_read_text(args.coco))
    except InputError as exc:
        raise _located(exc, args.coco)
    stats = annotation_io.dataset_stats(records)
    print(f"num_images {stats.num_images}")
    print(f"num_annotated_images {stats.num_annotated_images}")
    print(f"total_instances {stats.total_instances}")
    print(f"min_pixel_area {stats.min_pixel_area}")
    print(f"max_pixel_area {stats.max_pixel_area}")
    for name, count in stats.per_category.items():
        print(f"category {name} {count}")
    if args.transform:
        print("file_name scale pad_top pad_left out_h out_w")
        for record in sorted(records, key=lambda r: r.image_id):
            t = preprocess.compute_square_pad(record.height, record.width, args.target)
            print(
                f"{record.file_name} {t.scale:.9f} {t.pad_top} {t.pad_left} "
                f"{t.out_h} {t.out_w}"
            )
    if args.out:
        doc = {
            "num_images": stats.num_images,
            "num_annotated_images": stats.num_annotated_images,
            "total_instances": stats.total_instances,
            "min_pixel_area": stats.min_pixel_area,
            "max_pixel_area": stats.max_pixel_area,
            "per_category": stats.per_category,
        }
        _write_text(args.out, json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def _load_eval_inputs(args: argparse.Namespace):
    try:
        records, categories = annotation_io.import_coco(_read_text(args.gt))
    except InputError as exc:
        raise _located(exc, args.gt)
    try:
        detections = evaluation.read_detections(_read_text(args.dt), records, categories)
    except InputError as exc:
        raise _located(exc, args.dt)
    return records, detections


def _eval_params(args: argparse.Namespace, min_confidence: float) -> evaluation.EvalParams:
    try:
        return evaluation.EvalParams(
            mode=args.mode,
            max_detections_per_image=args.max_det,
            min_confidence=min_confidence,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_evaluate(args: argparse.Namespace) -> int:
    records, detections = _load_eval_inputs(args)
    params = _eval_params(args, args.min_conf)
    try:
        summary = evaluation.evaluate(records, detections, params)
    except ValueError as exc:
        raise InputError(str(exc), location=args.dt) from None
    print(evaluation.format_summary_table(summary), end="")
    if args.out:
        doc = evaluation.summary_to_dict(summary)
        _write_text(args.out, json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    records, detections = _load_eval_inputs(args)
    try:
        confidences = [float(v) for v in args.conf.split(",") if v]
    except ValueError:
        raise InputError(f"bad confidence list {args.conf!r}") from None
    if not confidences:
        raise InputError("confidence list is empty")
    params = _eval_params(args, 0.0)
    try:
        rows = evaluation.confidence_sweep(records, detections, params, confidences)
    except ValueError as exc:
        raise InputError(str(exc), location=args.dt) from None
    print(evaluation.format_sweep_table(rows), end="")
    if args.out:
        doc = evaluation.sweep_to_dicts(rows)
        _write_text(args.out, json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def cmd_plan(args: argparse.Namespace) -> int:
    if args.builtin:
        plan = schedule.builtin_paper_plan()
    else:
        try:
            plan = schedule.parse_plan(_read_text(args.file))
        except InputError as exc:
            raise _located(exc, args.file)
    status = EXIT_OK
    if args.validate:
        violations = schedule.validate_plan(plan)
        print(f"{len(violations)} violations")
        for violation in violations:
            print(f"violation: {violation}")
        if violations:
            status = EXIT_FINDINGS
    if args.emit:
        try:
            config = schedule.emit_config(plan, args.emit)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        if args.out:
            _write_text(args.out, config)
        else:
            print(config, end="")
    elif args.out:
        _write_text(args.out, schedule.serialize_plan(plan))
    if not args.validate and not args.emit and not args.out:
        print("model_id parent stage layers augmentation epochs total_epochs")
        for s in plan.stages:
            aug = "Y" if s.augmentation else "N"
            print(f"{s.model_id} {s.parent} {s.tl_stage} {s.layers} {aug} "
                  f"{s.epochs} {s.total_epochs}")
    return status


def _parse_grid(text: str):
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([float(v) for v in line.split()])
        except ValueError:
            raise InputError("grid rows must hold numbers", location=f"line {lineno}") from None
    if not rows:
        raise InputError("grid file is empty")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InputError("grid rows must all have the same length")
    return rows


def cmd_kernel(args: argparse.Namespace) -> int:
    grid = _parse_grid(_read_text(args.grid))
    try:
        roi = tuple(float(v) for v in args.roi.split(","))
    except ValueError:
        raise InputError(f"bad roi {args.roi!r}, expected x1,y1,x2,y2") from None
    if len(roi) != 4:
        raise InputError(f"bad roi {args.roi!r}, expected x1,y1,x2,y2")
    try:
        out_h, out_w = (int(v) for v in args.out_size.lower().split("x"))
    except ValueError:
        raise InputError(f"bad output size {args.out_size!r}, expected HxW") from None
    try:
        aligned = roi_align(grid, roi, out_h, out_w, samples_per_bin=args.samples)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    for row in aligned:
        print(" ".join(f"{v:.6f}" for v in row))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bottleseg",
        description="Waste-bottle segmentation dataset, evaluation and planning toolkit",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("convert", help="convert a VIA project to a COCO dataset")
    p.add_argument("--via", required=True, help="VIA 2.x project or annotation export")
    p.add_argument("--dims", required=True, help="dimension manifest: file_name height width")
    p.add_argument("--out", required=True, help="COCO dataset output path")
    p.add_argument("--label-key", default=None, help="region attribute holding the class label")
    p.add_argument("--categories", default=None, help="comma-separated category order")
    p.add_argument("--default-category", default=annotation_io.DEFAULT_CATEGORY,
                   help="category for unlabeled regions")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stats", help="dataset statistics for a COCO dataset")
    p.add_argument("--coco", required=True, help="COCO dataset path")
    p.add_argument("--transform", action="store_true",
                   help="also print the square-pad transform per image")
    p.add_argument("--target", type=int, default=1024, help="square target side")
    p.add_argument("--out", default=None, help="write stats as JSON")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("evaluate", help="COCO-protocol evaluation of detection results")
    p.add_argument("--gt", required=True, help="COCO dataset with ground truth")
    p.add_argument("--dt", required=True, help="COCO results array with detections")
    p.add_argument("--mode", choices=(evaluation.MODE_MASK, evaluation.MODE_BBOX),
                   default=evaluation.MODE_MASK)
    p.add_argument("--min-conf", type=float, default=0.0, help="confidence pre-filter")
    p.add_argument("--max-det", type=int, default=512, help="max detections per image")
    p.add_argument("--out", default=None, help="write the summary as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate across detection-minimum-confidence values")
    p.add_argument("--gt", required=True, help="COCO dataset with ground truth")
    p.add_argument("--dt", required=True, help="COCO results array with detections")
    p.add_argument("--conf", default="0.5,0.7,0.9", help="comma-separated confidences")
    p.add_argument("--mode", choices=(evaluation.MODE_MASK, evaluation.MODE_BBOX),
                   default=evaluation.MODE_MASK)
    p.add_argument("--max-det", type=int, default=512, help="max detections per image")
    p.add_argument("--out", default=None, help="write the sweep rows as JSON")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plan", help="inspect, validate or emit transfer-learning plans")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--builtin", action="store_true", help="use the published 15-model plan")
    source.add_argument("--file", default=None, help="plan JSON document")
    p.add_argument("--validate", action="store_true", help="report violations (exit 1 if any)")
    p.add_argument("--emit", default=None, metavar="MODEL_ID",
                   help="emit the training config for a model and its ancestry")
    p.add_argument("--out", default=None, help="write the plan or emitted config")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("kernel", help="debug: run RoIAlign on a plain-text grid")
    p.add_argument("--grid", required=True, help="text grid, one row of numbers per line")
    p.add_argument("--roi", required=True, help="x1,y1,x2,y2 in grid coordinates")
    p.add_argument("--out-size", required=True, help="output size HxW")
    p.add_argument("--samples", type=int, default=2, help="samples per bin side")
    p.set_defaults(func=cmd_kernel)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
