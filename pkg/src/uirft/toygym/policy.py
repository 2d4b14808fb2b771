"""Tabular surrogate policy standing in for the vision-language model.

For every task the policy holds one row of logits per decision head:

``format``  comply with the tag grammar, or emit a malformed response
``think``   length of the filler think segment (THINK mode only)
``type``    action type, over the five-action vocabulary
``x``/``y`` grid column / row of the click (Click only)

A rollout samples these heads in that order, renders the decisions as
response text, and records the exact log-probability of each sampled
token. Coordinates are rendered as integer pixels in *resized*-image space,
as a real model would see a smart-resized screenshot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..geometry import ImageSize, Point, ResizePolicy, smart_resize
from ..grpo import TokenRef
from ..kernels import log_softmax_rows
from ..parsing import ACTION_TYPES, Action, ActionType, Mode, ParsedResponse, serialize_response
from ..tasks import TaskSample, atomic_write

HEADS = ("format", "think", "type", "x", "y")
DEFAULT_THINK_LENGTHS = tuple(range(0, 256, 16))
FILLER = ("locate", "the", "target", "element", "on", "screen", "then", "decide")
CHECKPOINT_FORMAT = "uirft-checkpoint/1"


@dataclass
class Rollout:
    text: str
    tokens: list[TokenRef]
    logprobs: np.ndarray


@dataclass
class SurrogatePolicy:
    params: dict[str, np.ndarray]
    feature_ids: list[str]
    grid: int = 16
    think_lengths: tuple[int, ...] = DEFAULT_THINK_LENGTHS
    temperature: float = 1.0
    resize: ResizePolicy = field(default_factory=ResizePolicy)
    stages: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.feature_index = {sid: i for i, sid in enumerate(self.feature_ids)}
        if len(self.feature_index) != len(self.feature_ids):
            raise ValueError("duplicate feature ids")
        expected = {"format": 2, "think": len(self.think_lengths), "type": len(ACTION_TYPES), "x": self.grid, "y": self.grid}
        for h, v in expected.items():
            arr = self.params.get(h)
            if arr is None or arr.shape != (len(self.feature_ids), v):
                raise ValueError(f"head {h!r} must have shape {(len(self.feature_ids), v)}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"head {h!r} has non-finite logits")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    @classmethod
    def create(
        cls,
        feature_ids: Sequence[str],
        grid: int = 16,
        think_lengths: Sequence[int] = DEFAULT_THINK_LENGTHS,
        temperature: float = 1.0,
        think_bias: float = 2.0,
        resize: ResizePolicy | None = None,
    ) -> "SurrogatePolicy":
        """Uniform heads everywhere; the think head leans towards long reasoning."""
        f = len(feature_ids)
        k = len(think_lengths)
        ramp = np.linspace(0.0, think_bias, k) if k > 1 else np.zeros(1)
        params = {
            "format": np.zeros((f, 2)),
            "think": np.tile(ramp, (f, 1)),
            "type": np.zeros((f, len(ACTION_TYPES))),
            "x": np.zeros((f, grid)),
            "y": np.zeros((f, grid)),
        }
        return cls(params, list(feature_ids), grid, tuple(think_lengths), temperature, resize or ResizePolicy())

    @classmethod
    def base_model(
        cls,
        tasks: Sequence[TaskSample],
        format_bias: float = 3.0,
        type_bias: float = 3.0,
        **kw,
    ) -> "SurrogatePolicy":
        """Stand-in for a pretrained model before fine-tuning.

        It mostly follows the tag grammar and reads the verb of the
        instruction as an action-type hint, but knows nothing about where
        elements are: the coordinate heads stay uniform.
        """
        policy = cls.create([t.id for t in tasks], **kw)
        policy.params["format"][:, 0] = format_bias
        for i, t in enumerate(tasks):
            hint = instruction_hint(t.instruction)
            if hint is not None:
                policy.params["type"][i, ACTION_TYPES.index(hint)] = type_bias
        return policy

    def copy(self) -> "SurrogatePolicy":
        return SurrogatePolicy(
            {h: v.copy() for h, v in self.params.items()},
            list(self.feature_ids),
            self.grid,
            self.think_lengths,
            self.temperature,
            self.resize,
            list(self.stages),
        )

    def row(self, sample: TaskSample) -> int:
        try:
            return self.feature_index[sample.id]
        except KeyError:
            raise KeyError(f"policy has no parameters for task {sample.id!r}") from None

    def log_probs(self, head: str, row: int, params: dict | None = None) -> np.ndarray:
        table = (params or self.params)[head]
        return log_softmax_rows(table[row], 1.0 / self.temperature)

    # rendering ------------------------------------------------------------

    def cell_point(self, size: ImageSize, col: int, row: int) -> Point:
        """Integer pixel at the center of a grid cell, in resized-image space."""
        resized = smart_resize(size, self.resize)
        return Point(
            float(round((col + 0.5) * resized.width / self.grid)),
            float(round((row + 0.5) * resized.height / self.grid)),
        )

    def render(self, sample: TaskSample, mode: Mode, choices: dict[str, int]) -> str:
        mode = Mode(mode)
        kind = ACTION_TYPES[choices["type"]]
        coord = self.cell_point(sample.image_size, choices["x"], choices["y"]) if kind is ActionType.CLICK else None
        action = Action(kind, coord)
        compliant = choices["format"] == 0
        if mode is Mode.THINK:
            if not compliant:
                return serialize_response(ParsedResponse(actions=[action], well_formed=True), Mode.NOTHINK)
            n = self.think_lengths[choices["think"]]
            think = " ".join(FILLER[i % len(FILLER)] for i in range(n))
            return serialize_response(ParsedResponse(think=think, actions=[action], well_formed=True), Mode.THINK)
        if not compliant:
            # a think segment is a grammar violation in NOTHINK mode
            return serialize_response(ParsedResponse(think="", actions=[action], well_formed=True), Mode.THINK)
        return serialize_response(ParsedResponse(actions=[action], well_formed=True), Mode.NOTHINK)

    def _decode(self, sample: TaskSample, mode: Mode, pick) -> Rollout:
        mode = Mode(mode)
        r = self.row(sample)
        tokens: list[TokenRef] = []
        logps: list[float] = []
        choices: dict[str, int] = {}

        def draw(head):
            lp = self.log_probs(head, r)
            k = pick(lp)
            tokens.append((head, r, k))
            logps.append(float(lp[k]))
            choices[head] = k

        draw("format")
        if mode is Mode.THINK and choices["format"] == 0:
            draw("think")
        draw("type")
        if ACTION_TYPES[choices["type"]] is ActionType.CLICK:
            draw("x")
            draw("y")
        return Rollout(self.render(sample, mode, choices), tokens, np.array(logps))

    def rollout(self, sample: TaskSample, mode: Mode | str, rng: np.random.Generator) -> Rollout:
        def sample_token(lp):
            p = np.exp(lp)
            k = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
            return min(k, len(p) - 1)

        return self._decode(sample, mode, sample_token)

    def greedy(self, sample: TaskSample, mode: Mode | str) -> Rollout:
        return self._decode(sample, mode, lambda lp: int(np.argmax(lp)))

    def sequence_logprobs(self, tokens: Sequence[TokenRef], params: dict | None = None) -> np.ndarray:
        return np.array([self.log_probs(h, r, params)[k] for h, r, k in tokens])

    # persistence ------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "grid": self.grid,
            "think_lengths": list(self.think_lengths),
            "temperature": self.temperature,
            "resize": {"factor": self.resize.factor, "min_pixels": self.resize.min_pixels, "max_pixels": self.resize.max_pixels},
            "stages": list(self.stages),
            "feature_ids": list(self.feature_ids),
            "params": {h: self.params[h].tolist() for h in HEADS},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SurrogatePolicy":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"not a policy checkpoint (format={d.get('format')!r})")
        return cls(
            {h: np.asarray(d["params"][h], dtype=np.float64) for h in HEADS},
            list(d["feature_ids"]),
            int(d["grid"]),
            tuple(d["think_lengths"]),
            float(d["temperature"]),
            ResizePolicy(**d["resize"]),
            list(d.get("stages", [])),
        )

    def save(self, path) -> None:
        atomic_write(path, json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "SurrogatePolicy":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


_VERBS = (
    (("click", "tap", "press", "select"), ActionType.CLICK),
    (("scroll", "swipe"), ActionType.SCROLL),
    (("go back", "back", "return"), ActionType.NAVIGATE_BACK),
    (("open", "launch"), ActionType.OPEN_APP),
    (("type", "enter", "input", "write"), ActionType.INPUT_TEXT),
)


def instruction_hint(instruction: str) -> ActionType | None:
    """Action type suggested by the leading verb of an instruction, if any."""
    text = instruction.strip().lower()
    for verbs, kind in _VERBS:
        if text.startswith(verbs):
            return kind
    return None


def oracle_policy(tasks: Sequence[TaskSample], grid: int = 16, strength: float = 20.0, **kw) -> SurrogatePolicy:
    """Logits one-hot (scaled by ``strength``) on each task's ground truth."""
    policy = SurrogatePolicy.create([t.id for t in tasks], grid=grid, **kw)
    for t in tasks:
        _imprint(policy, t, strength)
    return policy


def weak_policy(tasks: Sequence[TaskSample], seed: int, skill: float = 0.5, grid: int = 16, **kw) -> SurrogatePolicy:
    """Seeded noisy reference: solves roughly ``skill`` of the tasks greedily.

    Think-length logits are random per task so that greedy reasoning
    lengths vary across samples.
    """
    rng = np.random.default_rng(seed)
    policy = SurrogatePolicy.create([t.id for t in tasks], grid=grid, **kw)
    f = len(tasks)
    for h in ("type", "x", "y", "think"):
        policy.params[h] = rng.normal(0.0, 1.0, size=policy.params[h].shape)
    policy.params["format"][:, 0] = 5.0
    knows = rng.random(f) < skill
    for t, k in zip(tasks, knows):
        if k:
            _imprint(policy, t, 10.0)
    return policy


def _target_cell(policy: SurrogatePolicy, t: TaskSample) -> tuple[int, int] | None:
    from ..geometry import point_in_bbox, scale_coordinates

    if t.bbox is None:
        return None
    c = t.bbox.center()
    col = min(policy.grid - 1, int(c.x * policy.grid / t.image_size.width))
    row = min(policy.grid - 1, int(c.y * policy.grid / t.image_size.height))
    # rendered pixel of that cell must land inside the box once rescaled
    p = scale_coordinates(policy.cell_point(t.image_size, col, row), t.image_size, policy.resize)
    return (col, row) if point_in_bbox(p, t.bbox) else None


def _imprint(policy: SurrogatePolicy, t: TaskSample, strength: float) -> None:
    r = policy.feature_index[t.id]
    kind = t.action_type
    if kind is None:
        return
    policy.params["format"][r] = [strength, 0.0]
    policy.params["type"][r] = 0.0
    policy.params["type"][r, ACTION_TYPES.index(kind)] = strength
    cell = _target_cell(policy, t)
    if cell is not None:
        policy.params["x"][r] = 0.0
        policy.params["y"][r] = 0.0
        policy.params["x"][r, cell[0]] = strength
        policy.params["y"][r, cell[1]] = strength
