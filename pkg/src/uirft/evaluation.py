"""Benchmark-style scoring of single-step GUI action predictions.

Two protocols are supported:

``screenspot``
    grounding is correct when the predicted click lands inside the
    ground-truth box (click samples without a box are excluded and counted).
``androidcontrol``
    grounding is correct when the predicted click lies within 14% of the
    screen diagonal from the ground-truth point (the box center when only a
    box is known).

Both protocols also report action-type accuracy over every sample and the
average of the type and grounding accuracies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .geometry import Point, ResizePolicy, point_in_bbox, scale_coordinates, within_screen_distance
from .parsing import Action, ActionType, Mode, parse_response
from .rewards import CoordinateSpace
from .tasks import TaskSample, iter_jsonl

PROTOCOLS = ("screenspot", "androidcontrol")


class UnmatchedIdsError(ValueError):
    def __init__(self, missing_samples: Sequence[str], missing_predictions: Sequence[str]):
        self.missing_samples = list(missing_samples)
        self.missing_predictions = list(missing_predictions)
        parts = []
        if self.missing_samples:
            parts.append(f"predictions without a task: {', '.join(self.missing_samples)}")
        if self.missing_predictions:
            parts.append(f"tasks without a prediction: {', '.join(self.missing_predictions)}")
        super().__init__("; ".join(parts) or "nothing to score")


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    action: Action | None
    response_text: str = ""
    well_formed: bool = False

    @classmethod
    def from_text(cls, sample_id: str, text: str, mode: Mode | str = Mode.THINK) -> "Prediction":
        parsed = parse_response(text, mode)
        return cls(sample_id, parsed.action, text, parsed.well_formed)


@dataclass
class ScoringContext:
    coordinate_space: CoordinateSpace = CoordinateSpace.ORIGINAL
    resize: ResizePolicy = field(default_factory=ResizePolicy)
    ratio: float = 0.14


def _click_point(pred: Prediction, sample: TaskSample, ctx: ScoringContext) -> Point | None:
    if not pred.well_formed or pred.action is None or pred.action.kind is not ActionType.CLICK:
        return None
    p = pred.action.coordinate
    if p is None and pred.action.bbox is not None:
        p = pred.action.bbox.center()
    if p is None:
        return None
    if CoordinateSpace(ctx.coordinate_space) is CoordinateSpace.RESIZED:
        p = scale_coordinates(p, sample.image_size, ctx.resize)
    return p


def type_correct(pred: Prediction, sample: TaskSample) -> bool:
    return bool(pred.well_formed and pred.action is not None and pred.action.kind == sample.action_type)


def grounding_correct(pred: Prediction, sample: TaskSample, ctx: ScoringContext | None = None) -> bool:
    """Click lands inside the ground-truth box.

    Raises:
        ValueError: the sample has no box and cannot be evaluated.
    """
    if sample.bbox is None:
        raise ValueError(f"sample {sample.id} has no ground-truth box")
    p = _click_point(pred, sample, ctx or ScoringContext())
    return p is not None and point_in_bbox(p, sample.bbox)


def distance_correct(pred: Prediction, sample: TaskSample, ratio: float = 0.14, ctx: ScoringContext | None = None) -> bool:
    gt = sample.target_point
    if gt is None:
        raise ValueError(f"sample {sample.id} has no ground-truth point")
    p = _click_point(pred, sample, ctx or ScoringContext())
    return p is not None and within_screen_distance(p, gt, sample.image_size, ratio)


def is_correct(pred: Prediction, sample: TaskSample, ctx: ScoringContext | None = None) -> bool:
    """Single-sample correctness: right type, and for clicks a hit inside the box."""
    if not type_correct(pred, sample):
        return False
    if sample.action_type is ActionType.CLICK:
        return sample.bbox is not None and grounding_correct(pred, sample, ctx)
    return True


@dataclass
class MetricReport:
    protocol: str
    type_accuracy: float
    grounding_accuracy: float
    counts: dict
    strata: dict

    @property
    def average(self) -> float:
        return (self.type_accuracy + self.grounding_accuracy) / 2

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "type_accuracy": self.type_accuracy,
            "grounding_accuracy": self.grounding_accuracy,
            "average": self.average,
            "counts": self.counts,
            "strata": self.strata,
        }

    def table(self) -> str:
        return format_report_table(self.to_dict())


def format_report_table(report: dict) -> str:
    rows = [("stratum", "n", "Type", "Grounding (n)", "Average")]
    c = report["counts"]
    rows.append(
        (
            "overall",
            str(c["samples"]),
            f"{100 * report['type_accuracy']:.1f}",
            f"{100 * report['grounding_accuracy']:.1f} ({c['grounding_evaluated']})",
            f"{100 * report['average']:.1f}",
        )
    )
    for key, s in sorted(report["strata"].items()):
        g = f"{100 * s['grounding_accuracy']:.1f} ({s['grounding_evaluated']})" if s["grounding_evaluated"] else "-"
        rows.append((key, str(s["samples"]), f"{100 * s['type_accuracy']:.1f}", g, "-"))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = [f"protocol: {report['protocol']}"]
    for j, r in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i]) for i, cell in enumerate(r)))
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _index(items, key, what) -> dict:
    out = {}
    for it in items:
        k = key(it)
        if k in out:
            raise ValueError(f"duplicate {what} id {k!r}")
        out[k] = it
    return out


def score(
    predictions: Iterable[Prediction],
    samples: Iterable[TaskSample],
    protocol: str = "screenspot",
    ctx: ScoringContext | None = None,
) -> MetricReport:
    """Score predictions against tasks; every id must appear on both sides."""
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    ctx = ctx or ScoringContext()
    preds = _index(predictions, lambda p: p.sample_id, "prediction")
    tasks = _index(samples, lambda s: s.id, "sample")
    extra = sorted(set(preds) - set(tasks))
    missing = sorted(set(tasks) - set(preds))
    if extra or missing or not tasks:
        raise UnmatchedIdsError(extra, missing)

    counts = {"samples": 0, "type_correct": 0, "grounding_evaluated": 0, "grounding_correct": 0, "excluded": 0}
    strata: dict[str, dict] = {}
    for sid in sorted(tasks):
        sample, pred = tasks[sid], preds[sid]
        key = f"{sample.platform}/{sample.element_type or '-'}/{sample.action}"
        st = strata.setdefault(key, {"samples": 0, "type_correct": 0, "grounding_evaluated": 0, "grounding_correct": 0, "excluded": 0})
        t_ok = type_correct(pred, sample)
        for bucket in (counts, st):
            bucket["samples"] += 1
            bucket["type_correct"] += t_ok
        if sample.action_type is not ActionType.CLICK:
            continue
        if protocol == "screenspot":
            evaluable = sample.bbox is not None
            ok = evaluable and grounding_correct(pred, sample, ctx)
        else:
            evaluable = sample.target_point is not None
            ok = evaluable and distance_correct(pred, sample, ctx.ratio, ctx)
        for bucket in (counts, st):
            if evaluable:
                bucket["grounding_evaluated"] += 1
                bucket["grounding_correct"] += ok
            else:
                bucket["excluded"] += 1

    for st in strata.values():
        st["type_accuracy"] = _ratio(st["type_correct"], st["samples"])
        st["grounding_accuracy"] = _ratio(st["grounding_correct"], st["grounding_evaluated"])
    return MetricReport(
        protocol,
        _ratio(counts["type_correct"], counts["samples"]),
        _ratio(counts["grounding_correct"], counts["grounding_evaluated"]),
        counts,
        strata,
    )


def load_predictions(path, mode: Mode | str = Mode.THINK) -> tuple[list[Prediction], ScoringContext]:
    """Read a predictions JSONL file.

    An optional first record ``{"header": {...}}`` may declare
    ``coordinate_space`` (``original`` or ``resized``), ``mode``,
    ``max_pixels`` and ``factor``. Other records carry ``sample_id`` and
    ``response_text``.
    """
    records = list(iter_jsonl(path))
    ctx = ScoringContext()
    if records and "header" in records[0]:
        header = records.pop(0)["header"]
        ctx.coordinate_space = CoordinateSpace(header.get("coordinate_space", "original"))
        mode = header.get("mode", mode)
        if "max_pixels" in header or "factor" in header:
            ctx.resize = ResizePolicy(
                factor=int(header.get("factor", ctx.resize.factor)),
                max_pixels=int(header.get("max_pixels", ctx.resize.max_pixels)),
            )
    preds = []
    for r in records:
        if "sample_id" not in r or "response_text" not in r:
            raise ValueError(f"prediction record needs sample_id and response_text: {r!r}")
        preds.append(Prediction.from_text(str(r["sample_id"]), r["response_text"], mode))
    return preds, ctx


def report_json(report: MetricReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
