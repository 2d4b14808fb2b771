"""Quality, difficulty and diversity filters for building a small RFT set."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .evaluation import Prediction, ScoringContext, is_correct
from .parsing import ActionType, Mode, parse_response
from .rewards import CoordinateSpace
from .tasks import ELEMENT_TYPES, TaskSample

STAGE_ORDER = ("quality", "difficulty", "diversity")

# minimum counts per action type for a 136-sample mobile training set
DEFAULT_QUOTAS = {"click": 101, "scroll": 5, "input_text": 2, "navigate_back": 9, "open_app": 19}


class Strategy(str, enum.Enum):
    FAILURE_ONLY = "failure_only"
    TOP_K = "top_k_reasoning_length"


class InfeasibleSelection(ValueError):
    def __init__(self, stratum: str, needed: int, available: int):
        self.stratum = stratum
        self.needed = needed
        self.available = available
        super().__init__(f"stratum {stratum!r} needs {needed} samples but only {available} are available")


def parse_stratum(key: str) -> tuple[str, str]:
    """Map a quota key to ``(field, value)``.

    Accepts ``action:click`` / ``element:icon`` or a bare action or element
    type name.
    """
    field_, _, value = key.partition(":")
    if not value:
        field_, value = "", key
    if field_ in ("", "action"):
        kind = ActionType._value2member_map_.get(value.strip().lower())
        if kind is not None:
            return "action", kind.value
        if field_ == "action":
            raise ValueError(f"unknown action type in quota key {key!r}")
    if field_ in ("", "element") and value in ELEMENT_TYPES:
        return "element", value
    raise ValueError(f"quota key {key!r} names neither an action type nor an element type")


def _stratum_label(f: str, v: str) -> str:
    return f"{f}:{v}"


def _in_stratum(sample: TaskSample, f: str, v: str) -> bool:
    if f == "action":
        return sample.action == v
    return sample.element_type == v


@dataclass(frozen=True)
class SelectionConfig:
    stages: tuple[str, ...] = STAGE_ORDER
    strategy: Strategy = Strategy.FAILURE_ONLY
    k: int = 64
    quotas: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_QUOTAS))
    target: int = 136
    seed: int = 0
    require_click_bbox: bool = True

    def __post_init__(self):
        if tuple(self.stages) != STAGE_ORDER:
            raise ValueError(f"selection stages run in the fixed order {STAGE_ORDER}, got {tuple(self.stages)}")
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.target < 0:
            raise ValueError("target must be >= 0")
        for key, n in self.quotas.items():
            parse_stratum(key)
            if n < 0:
                raise ValueError(f"quota for {key!r} must be >= 0")
        if sum(self.quotas.values()) > self.target:
            raise ValueError(f"quota minima sum to {sum(self.quotas.values())}, above target {self.target}")


def passes_quality(sample: TaskSample, require_click_bbox: bool = True) -> bool:
    if not sample.instruction.strip():
        return False
    kind = sample.action_type
    if kind is None:
        return False
    if sample.bbox is not None and not (sample.bbox.is_valid() and sample.bbox.within(sample.image_size)):
        return False
    if kind is ActionType.CLICK and require_click_bbox and sample.bbox is None:
        return False
    return True


def quality_filter(samples: Sequence[TaskSample], config: SelectionConfig | None = None) -> list[TaskSample]:
    req = True if config is None else config.require_click_bbox
    return [s for s in samples if passes_quality(s, req)]


@dataclass(frozen=True)
class Judgement:
    sample_id: str
    correct: bool
    think_length: int


class PolicyOracle:
    """Reference model for the difficulty stage.

    Wraps any ``respond(sample) -> text`` callable; correctness is judged
    by the evaluation harness so "the model fails" has one definition.
    """

    def __init__(self, respond: Callable[[TaskSample], str], mode: Mode | str = Mode.THINK, context: ScoringContext | None = None):
        self.respond = respond
        self.mode = Mode(mode)
        self.context = context or ScoringContext()

    @classmethod
    def from_policy(cls, policy, mode: Mode | str = Mode.THINK) -> "PolicyOracle":
        """Greedy decoding of a :class:`~uirft.toygym.SurrogatePolicy`."""
        ctx = ScoringContext(CoordinateSpace.RESIZED, policy.resize)
        return cls(lambda s: policy.greedy(s, mode).text, mode, ctx)

    def judge(self, sample: TaskSample) -> Judgement:
        text = self.respond(sample)
        pred = Prediction.from_text(sample.id, text, self.mode)
        parsed = parse_response(text, self.mode)
        return Judgement(sample.id, is_correct(pred, sample, self.context), parsed.think_length)


def difficulty_filter(
    samples: Sequence[TaskSample],
    oracle: PolicyOracle,
    strategy: Strategy | str = Strategy.FAILURE_ONLY,
    k: int = 64,
) -> list[TaskSample]:
    strategy = Strategy(strategy)
    if k < 0:
        raise ValueError("k must be >= 0")
    judged = [(s, oracle.judge(s)) for s in samples]
    failures = [(s, j) for s, j in judged if not j.correct]
    if strategy is Strategy.FAILURE_ONLY:
        return [s for s, _ in failures]
    ranked = sorted(failures, key=lambda sj: (-sj[1].think_length, sj[0].id))
    return [s for s, _ in ranked[:k]]


def diversity_select(
    samples: Sequence[TaskSample],
    quotas: Mapping[str, int],
    target: int,
    seed: int = 0,
) -> list[TaskSample]:
    """Stratified draw: meet every quota minimum, then fill to ``target`` at random.

    Quotas are served in sorted key order; a sample counts towards every
    stratum it belongs to. The result is sorted by id.
    """
    pool = sorted(samples, key=lambda s: s.id)
    if len({s.id for s in pool}) != len(pool):
        raise ValueError("duplicate sample ids in selection pool")
    rng = np.random.default_rng(seed)
    chosen: set[int] = set()
    for key in sorted(quotas):
        f, v = parse_stratum(key)
        n = quotas[key]
        members = [i for i, s in enumerate(pool) if _in_stratum(s, f, v)]
        if len(members) < n:
            raise InfeasibleSelection(_stratum_label(f, v), n, len(members))
        need = n - sum(1 for i in members if i in chosen)
        if need <= 0:
            continue
        free = [i for i in members if i not in chosen]
        chosen.update(int(i) for i in rng.choice(free, size=need, replace=False))
    rest = [i for i in range(len(pool)) if i not in chosen]
    fill = min(max(target - len(chosen), 0), len(rest))
    if fill:
        chosen.update(int(i) for i in rng.choice(rest, size=fill, replace=False))
    return [pool[i] for i in sorted(chosen)]


def composition(samples: Sequence[TaskSample]) -> dict[str, int]:
    out: dict[str, int] = {}
    for s in samples:
        for label in (f"action:{s.action}", f"element:{s.element_type}" if s.element_type else None):
            if label:
                out[label] = out.get(label, 0) + 1
    return dict(sorted(out.items()))


@dataclass
class SelectionReport:
    stages: list[dict]
    composition: dict[str, int]
    selected_ids: list[str]

    def to_dict(self) -> dict:
        return {"stages": self.stages, "composition": self.composition, "selected_ids": self.selected_ids}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def run_pipeline(
    corpus: Sequence[TaskSample],
    config: SelectionConfig,
    oracle: PolicyOracle | None,
) -> tuple[list[TaskSample], SelectionReport]:
    stages = []
    current = list(corpus)
    for name in STAGE_ORDER:
        before = len(current)
        if name == "quality":
            current = quality_filter(current, config)
        elif name == "difficulty":
            if current and oracle is None:
                raise ValueError("difficulty stage needs an oracle policy")
            current = difficulty_filter(current, oracle, config.strategy, config.k) if current else []
        else:
            current = diversity_select(current, config.quotas, config.target, config.seed) if current else []
        stages.append({"stage": name, "in": before, "out": len(current), "composition": composition(current)})
    return current, SelectionReport(stages, composition(current), [s.id for s in current])


__all__ = [
    "InfeasibleSelection",
    "Judgement",
    "DEFAULT_QUOTAS",
    "PolicyOracle",
    "STAGE_ORDER",
    "SelectionConfig",
    "SelectionReport",
    "Strategy",
    "composition",
    "difficulty_filter",
    "diversity_select",
    "parse_stratum",
    "passes_quality",
    "quality_filter",
    "run_pipeline",
]
