"""Rule-based rewards: action type, coordinate, format and the DAST length term.

A rollout's total reward is ``r_type + r_coord + r_format``, optionally
calibrated by the difficulty-adaptive length reward ``r_length``. The
length reward needs group context (how many of the N rollouts for the same
task were correct), so it is computed from :class:`BudgetStats` built over
the whole group; :func:`score_group` does both passes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

from .geometry import BBox, Point, ResizePolicy, iou, point_in_bbox, scale_coordinates
from .parsing import ActionType, Mode, ParsedResponse, parse_response
from .tasks import TaskSample


class CoordinateVariant(str, enum.Enum):
    POINT_IN_BOX = "point_in_box"
    IOU_THRESHOLD = "iou_threshold"


class CoordinateSpace(str, enum.Enum):
    ORIGINAL = "original"
    RESIZED = "resized"


@dataclass(frozen=True)
class RewardConfig:
    mode: Mode = Mode.THINK
    coordinate_variant: CoordinateVariant = CoordinateVariant.POINT_IN_BOX
    iou_threshold: float = 0.5
    dast_enabled: bool = False
    max_length: int = 1024
    # space the policy's coordinates are expressed in; ground truth is always original
    coordinate_space: CoordinateSpace = CoordinateSpace.ORIGINAL
    resize: ResizePolicy = field(default_factory=ResizePolicy)

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "coordinate_variant", CoordinateVariant(self.coordinate_variant))
        object.__setattr__(self, "coordinate_space", CoordinateSpace(self.coordinate_space))
        if not 0 < self.iou_threshold < 1:
            raise ValueError(f"iou_threshold must be in (0, 1), got {self.iou_threshold}")
        if self.max_length < 1:
            raise ValueError(f"max_length must be >= 1, got {self.max_length}")


@dataclass(frozen=True)
class RewardBreakdown:
    r_type: int
    r_coord: int
    r_format: int
    r_length: float = 0.0

    @property
    def total(self) -> float:
        return self.r_type + self.r_coord + self.r_format + self.r_length

    @property
    def correct(self) -> bool:
        return self.r_type == 1 and self.r_coord == 1

    def to_record(self, sample_id: str, rollout_index: int) -> dict:
        return {
            "sample_id": sample_id,
            "rollout_index": rollout_index,
            "r_type": self.r_type,
            "r_coord": self.r_coord,
            "r_format": self.r_format,
            "r_length": self.r_length,
            "total": self.total,
        }


@dataclass(frozen=True)
class BudgetStats:
    correct_count: int
    group_size: int
    mean_correct_length: float
    budget: float

    @property
    def p(self) -> float:
        return self.correct_count / self.group_size


def action_type_reward(pred: ActionType | None, gt: ActionType | None) -> int:
    return int(pred is not None and pred == gt)


def coordinate_reward(
    pred: Point | BBox | None,
    gt_box: BBox | None,
    variant: CoordinateVariant | str = CoordinateVariant.POINT_IN_BOX,
    threshold: float = 0.5,
) -> int:
    """Binary location reward.

    With no ground-truth box (non-click steps) the reward is 1 exactly when
    the prediction carries no location either.
    """
    if gt_box is None:
        return int(pred is None)
    if pred is None:
        return 0
    if CoordinateVariant(variant) is CoordinateVariant.POINT_IN_BOX:
        return int(isinstance(pred, Point) and point_in_bbox(pred, gt_box))
    return int(isinstance(pred, BBox) and iou(pred, gt_box) > threshold)


def format_reward(resp: ParsedResponse | str, mode: Mode | str = Mode.THINK) -> int:
    mode = Mode(mode)
    if isinstance(resp, str):
        resp = parse_response(resp, mode)
    return int(resp.well_formed and resp.mode is mode)


def token_length_budget(lengths: Sequence[int], correct: Sequence[bool], max_length: int) -> BudgetStats:
    """Blend the mean correct length with ``max_length`` by the group's solve rate.

    With no correct rollout the budget is ``max_length``.
    """
    if len(lengths) != len(correct):
        raise ValueError(f"lengths ({len(lengths)}) and correct ({len(correct)}) differ in size")
    if not lengths:
        raise ValueError("token_length_budget needs a non-empty group")
    n = len(lengths)
    good = [l for l, c in zip(lengths, correct) if c]
    c = len(good)
    mean_good = sum(good) / c if c else 0.0
    p = c / n
    budget = p * mean_good + (1 - p) * max_length if c else float(max_length)
    return BudgetStats(c, n, mean_good, budget)


def length_reward(length: float, budget: float, correct: bool) -> float:
    if budget <= 0:
        raise ValueError(f"length budget must be positive, got {budget}")
    lam = (length - budget) / budget
    if correct:
        return max(-0.5 * lam + 0.5, 0.1)
    return min(0.9 * lam - 0.1, -0.1)


def _predicted_location(resp: ParsedResponse, sample: TaskSample, cfg: RewardConfig) -> Point | BBox | None:
    action = resp.action
    if cfg.coordinate_variant is CoordinateVariant.IOU_THRESHOLD:
        loc = action.bbox if action.bbox is not None else action.coordinate
    else:
        loc = action.coordinate if action.coordinate is not None else action.bbox
    if loc is None or cfg.coordinate_space is CoordinateSpace.ORIGINAL:
        return loc
    if isinstance(loc, BBox):
        a = scale_coordinates(Point(loc.x1, loc.y1), sample.image_size, cfg.resize)
        b = scale_coordinates(Point(loc.x2, loc.y2), sample.image_size, cfg.resize)
        return BBox(a.x, a.y, b.x, b.y)
    return scale_coordinates(loc, sample.image_size, cfg.resize)


def base_reward(sample: TaskSample, resp: ParsedResponse, cfg: RewardConfig) -> RewardBreakdown:
    """R_T, R_C and R_F for one rollout; unparseable answers earn no task reward."""
    r_format = format_reward(resp, cfg.mode)
    if not r_format:
        return RewardBreakdown(0, 0, 0)
    r_type = action_type_reward(resp.action.kind, sample.action_type)
    r_coord = coordinate_reward(
        _predicted_location(resp, sample, cfg), sample.bbox, cfg.coordinate_variant, cfg.iou_threshold
    )
    return RewardBreakdown(r_type, r_coord, r_format)


def total_reward(
    sample: TaskSample, resp: ParsedResponse, stats: BudgetStats | None, cfg: RewardConfig
) -> RewardBreakdown:
    if (stats is not None) != cfg.dast_enabled:
        raise ValueError("budget stats must be given exactly when DAST is enabled")
    base = base_reward(sample, resp, cfg)
    if not cfg.dast_enabled:
        return base
    r_length = length_reward(resp.token_length, stats.budget, base.correct)
    return RewardBreakdown(base.r_type, base.r_coord, base.r_format, r_length)


def score_group(sample: TaskSample, responses: Sequence[ParsedResponse], cfg: RewardConfig) -> list[RewardBreakdown]:
    """Score all N rollouts for one task, computing the length budget when needed."""
    if not cfg.dast_enabled:
        return [total_reward(sample, r, None, cfg) for r in responses]
    base = [base_reward(sample, r, cfg) for r in responses]
    stats = token_length_budget([r.token_length for r in responses], [b.correct for b in base], cfg.max_length)
    return [total_reward(sample, r, stats, cfg) for r in responses]
