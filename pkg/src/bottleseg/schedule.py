"""Staged transfer-learning plans: lineage of fine-tuning runs with epoch accounting.

A plan is a DAG of training stages rooted at the pre-trained base model
(parent ``BASE``), plus the shared hyperparameters. Plans are data;
consistency problems are reported as violations, not exceptions, so broken
plans can be loaded, inspected, and repaired.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InputError

BASE = "BASE"

LAYER_GROUPS = ("HEADS", "4+", "ALL")
BACKBONES = ("resnet50", "resnet101")
OPTIMIZERS = ("sgd", "adam")

CONFIG_KEYS = (
    "model_id",
    "run_order",
    "parent",
    "layers",
    "augmentation",
    "epochs",
    "backbone",
    "optimizer",
    "steps_per_epoch",
    "learning_rate",
    "train_rois",
    "max_gt_instances",
    "detection_max_instances",
    "detection_min_confidence",
)


@dataclass(frozen=True)
class TrainingStage:
    """One fine-tuning run: which model it starts from, what it trains, for how long.

    ``total_epochs`` is cumulative along the lineage (the base counts as 0).
    Fields are not validated here; :func:`validate_plan` reports problems
    as data.
    """

    model_id: str
    parent: str
    tl_stage: int
    layers: str
    augmentation: bool
    epochs: int
    total_epochs: int


@dataclass(frozen=True)
class PlanHyper:
    """Hyperparameters shared by every run of a plan."""

    backbone: str = "resnet101"
    optimizer: str = "sgd"
    steps_per_epoch: int = 1000
    learning_rate: float = 0.001
    train_rois: int = 512
    max_gt_instances: int = 512
    detection_max_instances: int = 512
    detection_min_confidence: float = 0.9


@dataclass(frozen=True)
class TransferPlan:
    stages: tuple[TrainingStage, ...]
    hyper: PlanHyper = field(default_factory=PlanHyper)


_PAPER_STAGES = (
    # (model_id, parent, tl_stage, layers, augmentation, epochs, total_epochs)
    ("M1", BASE, 1, "HEADS", True, 30, 30),
    ("M2", "M1", 2, "ALL", True, 30, 60),
    ("M3", "M1", 2, "ALL", False, 30, 60),
    ("M4", "M1", 2, "4+", True, 30, 60),
    ("M5", "M4", 2, "4+", True, 70, 130),
    ("M6", "M5", 3, "ALL", True, 20, 150),
    ("M7", "M5", 3, "4+", True, 20, 150),
    ("M8", "M4", 3, "ALL", True, 30, 90),
    ("M9", "M8", 3, "ALL", True, 70, 160),
    ("M10", "M1", 2, "4+", False, 30, 60),
    ("M11", "M10", 2, "4+", False, 70, 130),
    ("M12", "M11", 3, "ALL", False, 20, 150),
    ("M13", "M11", 3, "4+", False, 20, 150),
    ("M14", "M10", 3, "ALL", False, 30, 90),
    ("M15", "M14", 3, "ALL", False, 70, 160),
)


def builtin_paper_plan() -> TransferPlan:
    """The published 15-model incremental fine-tuning plan."""
    stages = tuple(TrainingStage(*row) for row in _PAPER_STAGES)
    return TransferPlan(stages=stages, hyper=PlanHyper())


def validate_plan(plan: TransferPlan) -> list[str]:
    """Check every plan invariant; returns one message per violation.

    Checks: unique model ids, resolvable acyclic lineage, positive epoch
    counts, cumulative epoch accounting along every lineage path, valid
    stage and layer values, stage monotonicity (child stage >= parent
    stage), stage-1 runs train HEADS only, lineage roots are stage 1, and
    hyperparameter ranges.
    """
    violations: list[str] = []
    by_id: dict[str, TrainingStage] = {}
    for stage in plan.stages:
        if stage.model_id == BASE:
            violations.append(f"model id {BASE!r} is reserved for the pre-trained base")
            continue
        if stage.model_id in by_id:
            violations.append(f"duplicate model id {stage.model_id}")
            continue
        by_id[stage.model_id] = stage

    for stage in plan.stages:
        if stage.model_id not in by_id:
            continue
        if stage.tl_stage not in (1, 2, 3):
            violations.append(f"{stage.model_id}: tl_stage must be 1, 2 or 3, got {stage.tl_stage}")
        if stage.layers not in LAYER_GROUPS:
            violations.append(
                f"{stage.model_id}: layers must be one of {', '.join(LAYER_GROUPS)}, "
                f"got {stage.layers!r}"
            )
        if stage.epochs < 1:
            violations.append(f"{stage.model_id}: epochs must be >= 1, got {stage.epochs}")
        if stage.tl_stage == 1 and stage.layers != "HEADS":
            violations.append(
                f"{stage.model_id}: stage 1 trains HEADS only, got {stage.layers!r}"
            )
        if stage.parent == BASE:
            if stage.tl_stage != 1:
                violations.append(
                    f"{stage.model_id}: runs starting from {BASE} must be stage 1, "
                    f"got stage {stage.tl_stage}"
                )
        elif stage.parent not in by_id:
            violations.append(f"{stage.model_id}: unknown parent {stage.parent!r}")

    # Cycle detection over resolvable parent links.
    state: dict[str, int] = {}  # 0 visiting, 1 done

    def walk(model_id: str) -> bool:
        chain = []
        current = model_id
        while current != BASE and current in by_id:
            if state.get(current) == 1:
                break
            if state.get(current) == 0:
                violations.append(f"cyclic lineage through {current}")
                for c in chain:
                    state[c] = 1
                state[current] = 1
                return False
            state[current] = 0
            chain.append(current)
            current = by_id[current].parent
        ok = True
        for c in chain:
            state[c] = 1
        return ok

    acyclic: dict[str, bool] = {}
    for stage in plan.stages:
        if stage.model_id in by_id:
            acyclic[stage.model_id] = walk(stage.model_id)

    for stage in plan.stages:
        if stage.model_id not in by_id or not acyclic.get(stage.model_id, False):
            continue
        if stage.parent == BASE:
            parent_total = 0
        elif stage.parent in by_id and acyclic.get(stage.parent, False):
            parent = by_id[stage.parent]
            parent_total = parent.total_epochs
            if stage.tl_stage < parent.tl_stage:
                violations.append(
                    f"{stage.model_id}: tl_stage {stage.tl_stage} below parent "
                    f"{parent.model_id} stage {parent.tl_stage}"
                )
        else:
            continue
        expected = parent_total + stage.epochs
        if stage.total_epochs != expected:
            violations.append(
                f"{stage.model_id}: total_epochs {stage.total_epochs} != "
                f"parent total {parent_total} + epochs {stage.epochs} = {expected}"
            )

    hyper = plan.hyper
    if hyper.backbone not in BACKBONES:
        violations.append(f"hyper: backbone must be one of {', '.join(BACKBONES)}")
    if hyper.optimizer not in OPTIMIZERS:
        violations.append(f"hyper: optimizer must be one of {', '.join(OPTIMIZERS)}")
    if hyper.steps_per_epoch < 1:
        violations.append(f"hyper: steps_per_epoch must be >= 1, got {hyper.steps_per_epoch}")
    if not hyper.learning_rate > 0:
        violations.append(f"hyper: learning_rate must be > 0, got {hyper.learning_rate}")
    for name in ("train_rois", "max_gt_instances", "detection_max_instances"):
        if getattr(hyper, name) < 1:
            violations.append(f"hyper: {name} must be >= 1, got {getattr(hyper, name)}")
    if not 0.0 <= hyper.detection_min_confidence <= 1.0:
        violations.append(
            f"hyper: detection_min_confidence must be in [0, 1], "
            f"got {hyper.detection_min_confidence}"
        )
    return violations


def lineage(plan: TransferPlan, model_id: str) -> list[TrainingStage]:
    """Run list from the first stage after BASE down to ``model_id``."""
    by_id = {s.model_id: s for s in plan.stages}
    if model_id not in by_id:
        raise ValueError(f"unknown model id {model_id!r}")
    runs = []
    current = model_id
    seen = set()
    while current != BASE:
        if current in seen:
            raise ValueError(f"cyclic lineage through {current}")
        if current not in by_id:
            raise ValueError(f"unknown parent {current!r} in lineage of {model_id}")
        seen.add(current)
        runs.append(by_id[current])
        current = by_id[current].parent
    runs.reverse()
    return runs


def emit_config(plan: TransferPlan, model_id: str) -> str:
    """Flat key-value training configuration for a stage and its full ancestry.

    One block per run in lineage order, each carrying the run fields and
    every shared hyperparameter; byte-deterministic.
    """
    hyper = plan.hyper
    blocks = []
    for order, run in enumerate(lineage(plan, model_id), start=1):
        values = {
            "model_id": run.model_id,
            "run_order": order,
            "parent": run.parent,
            "layers": run.layers,
            "augmentation": "horizontal_flip" if run.augmentation else "none",
            "epochs": run.epochs,
            "backbone": hyper.backbone,
            "optimizer": hyper.optimizer,
            "steps_per_epoch": hyper.steps_per_epoch,
            "learning_rate": hyper.learning_rate,
            "train_rois": hyper.train_rois,
            "max_gt_instances": hyper.max_gt_instances,
            "detection_max_instances": hyper.detection_max_instances,
            "detection_min_confidence": hyper.detection_min_confidence,
        }
        blocks.append("\n".join(f"{key} = {values[key]}" for key in CONFIG_KEYS))
    return "\n\n".join(blocks) + "\n"


def serialize_plan(plan: TransferPlan) -> str:
    """Plan as a JSON document with ``stages`` and ``hyper``; byte-deterministic."""
    doc = {
        "stages": [
            {
                "model_id": s.model_id,
                "parent": s.parent,
                "tl_stage": s.tl_stage,
                "layers": s.layers,
                "augmentation": s.augmentation,
                "epochs": s.epochs,
                "total_epochs": s.total_epochs,
            }
            for s in plan.stages
        ],
        "hyper": {
            "backbone": plan.hyper.backbone,
            "optimizer": plan.hyper.optimizer,
            "steps_per_epoch": plan.hyper.steps_per_epoch,
            "learning_rate": plan.hyper.learning_rate,
            "train_rois": plan.hyper.train_rois,
            "max_gt_instances": plan.hyper.max_gt_instances,
            "detection_max_instances": plan.hyper.detection_max_instances,
            "detection_min_confidence": plan.hyper.detection_min_confidence,
        },
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


_STAGE_FIELDS = {
    "model_id": str,
    "parent": str,
    "tl_stage": int,
    "layers": str,
    "augmentation": bool,
    "epochs": int,
    "total_epochs": int,
}


def parse_plan(document: str) -> TransferPlan:
    """Parse a plan document; structure is strict, semantics are left to validate_plan."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise InputError(
            f"malformed plan document: {exc.msg}",
            location=f"line {exc.lineno} column {exc.colno}",
        ) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("stages"), list):
        raise InputError("plan document needs a 'stages' array")
    stages = []
    for pos, raw in enumerate(doc["stages"]):
        if not isinstance(raw, dict):
            raise InputError(f"stage {pos}: must be an object")
        kwargs = {}
        for name, typ in _STAGE_FIELDS.items():
            if name not in raw:
                raise InputError(f"stage {pos}: missing field {name!r}")
            value = raw[name]
            if typ is bool:
                if not isinstance(value, bool):
                    raise InputError(f"stage {pos}: field {name!r} must be a boolean")
                kwargs[name] = value
            elif typ is int:
                if not isinstance(value, int) or isinstance(value, bool):
                    raise InputError(f"stage {pos}: field {name!r} must be an integer")
                kwargs[name] = value
            else:
                kwargs[name] = str(value)
        stages.append(TrainingStage(**kwargs))
    hyper_raw = doc.get("hyper", {})
    if not isinstance(hyper_raw, dict):
        raise InputError("'hyper' must be an object")
    defaults = PlanHyper()
    try:
        hyper = PlanHyper(
            backbone=str(hyper_raw.get("backbone", defaults.backbone)),
            optimizer=str(hyper_raw.get("optimizer", defaults.optimizer)),
            steps_per_epoch=int(hyper_raw.get("steps_per_epoch", defaults.steps_per_epoch)),
            learning_rate=float(hyper_raw.get("learning_rate", defaults.learning_rate)),
            train_rois=int(hyper_raw.get("train_rois", defaults.train_rois)),
            max_gt_instances=int(hyper_raw.get("max_gt_instances", defaults.max_gt_instances)),
            detection_max_instances=int(
                hyper_raw.get("detection_max_instances", defaults.detection_max_instances)
            ),
            detection_min_confidence=float(
                hyper_raw.get("detection_min_confidence", defaults.detection_min_confidence)
            ),
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad hyper values: {exc}") from None
    return TransferPlan(stages=tuple(stages), hyper=hyper)
