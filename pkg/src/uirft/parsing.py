"""Parse and emit policy responses in the ``<think>/<answer>`` tag format.

The tag grammar is the wire format between the policy and the reward
engine. Two modes exist:

* THINK:   ``<think> ... </think> <answer> ... </answer>``
* NOTHINK: ``<answer> ... </answer>`` with no think tag anywhere.

The answer payload is a list of records such as
``[{action: click, coordinate: [10, 20]}]``. Keys may be bare or quoted,
so the payload is read with a YAML flow-style loader, which accepts both
that relaxed form and strict JSON.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field

import yaml

from .geometry import BBox, Point


class Mode(str, enum.Enum):
    THINK = "think"
    NOTHINK = "nothink"


class ActionType(str, enum.Enum):
    CLICK = "click"
    OPEN_APP = "open_app"
    SCROLL = "scroll"
    NAVIGATE_BACK = "navigate_back"
    INPUT_TEXT = "input_text"


ACTION_TYPES = tuple(ActionType)

_ALIASES = {
    "back": ActionType.NAVIGATE_BACK,
    "openapp": ActionType.OPEN_APP,
    "inputtext": ActionType.INPUT_TEXT,
    "navigateback": ActionType.NAVIGATE_BACK,
}


@dataclass(frozen=True)
class Action:
    kind: ActionType
    coordinate: Point | None = None
    bbox: BBox | None = None

    def __post_init__(self):
        spatial = self.coordinate is not None or self.bbox is not None
        if spatial != (self.kind is ActionType.CLICK):
            raise ValueError(f"{self.kind.value} action must {'' if self.kind is ActionType.CLICK else 'not '}carry a location")


@dataclass
class ParsedResponse:
    think: str | None = None
    actions: list[Action] = field(default_factory=list)
    well_formed: bool = False
    token_length: int = 0
    mode: Mode | None = None

    @property
    def action(self) -> Action | None:
        """The scored action: the first record of the answer list."""
        return self.actions[0] if self.actions else None

    @property
    def think_length(self) -> int:
        return len(self.think.split()) if self.think else 0


def canonical_action_name(name: str) -> ActionType | None:
    if not isinstance(name, str):
        return None
    key = name.strip().lower()
    try:
        return ActionType(key)
    except ValueError:
        return _ALIASES.get(key.replace("_", "").replace(" ", ""))


_THINK_RE = re.compile(r"\s*<think>(.*?)</think>\s*<answer>(.*?)</answer>\s*", re.DOTALL)
_NOTHINK_RE = re.compile(r"\s*<answer>(.*?)</answer>\s*", re.DOTALL)
_TAGS = ("<think>", "</think>", "<answer>", "</answer>")


def _number(v) -> float | None:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _record_to_action(rec) -> Action | None:
    if not isinstance(rec, dict):
        return None
    kind = canonical_action_name(rec.get("action"))
    if kind is None:
        return None
    if kind is not ActionType.CLICK:
        # location fields on non-click actions are ignored
        return Action(kind)
    coord, box = rec.get("coordinate"), rec.get("bbox")
    if isinstance(coord, list) and len(coord) == 4 and box is None:
        coord, box = None, coord
    point = bbox = None
    if coord is not None:
        if not isinstance(coord, list) or len(coord) != 2:
            return None
        xy = [_number(v) for v in coord]
        if None in xy:
            return None
        point = Point(*xy)
    if box is not None:
        if not isinstance(box, list) or len(box) != 4:
            return None
        vals = [_number(v) for v in box]
        if None in vals or not BBox(*vals).is_valid():
            return None
        bbox = BBox(*vals)
    if point is None and bbox is None:
        return None
    return Action(kind, point, bbox)


def _parse_payload(payload: str) -> list[Action] | None:
    try:
        data = yaml.safe_load(payload)
    except Exception:
        return None
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list) or not data:
        return None
    actions = [_record_to_action(rec) for rec in data]
    if None in actions:
        return None
    return actions


def parse_response(raw: str, mode: Mode | str = Mode.THINK) -> ParsedResponse:
    """Parse rollout text. Never raises; malformed text yields ``well_formed=False``."""
    mode = Mode(mode)
    if not isinstance(raw, str):
        return ParsedResponse()
    length = len(raw.split())
    counts = {tag: raw.count(tag) for tag in _TAGS}
    think = None
    if mode is Mode.THINK:
        m = _THINK_RE.fullmatch(raw)
        ok = m is not None and all(c == 1 for c in counts.values())
        if m is not None:
            think = m.group(1).strip()
    else:
        m = _NOTHINK_RE.fullmatch(raw)
        ok = (
            m is not None
            and counts["<answer>"] == 1
            and counts["</answer>"] == 1
            and counts["<think>"] == 0
            and counts["</think>"] == 0
        )
    if not ok:
        return ParsedResponse(think=think, token_length=length, mode=mode)
    actions = _parse_payload(m.group(m.lastindex))
    if actions is None:
        return ParsedResponse(think=think, token_length=length, mode=mode)
    return ParsedResponse(think=think, actions=actions, well_formed=True, token_length=length, mode=mode)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def format_action(action: Action) -> str:
    parts = [f"action: {action.kind.value}"]
    if action.coordinate is not None:
        parts.append(f"coordinate: [{_fmt(action.coordinate.x)}, {_fmt(action.coordinate.y)}]")
    if action.bbox is not None:
        parts.append("bbox: [" + ", ".join(_fmt(v) for v in action.bbox) + "]")
    return "{" + ", ".join(parts) + "}"


def serialize_response(r: ParsedResponse, mode: Mode | str = Mode.THINK) -> str:
    """Emit canonical text that :func:`parse_response` maps back to ``r``."""
    mode = Mode(mode)
    if not r.well_formed or not r.actions:
        raise ValueError("only well-formed responses can be serialized")
    answer = "<answer>[" + ", ".join(format_action(a) for a in r.actions) + "]</answer>"
    if mode is Mode.NOTHINK:
        return answer
    think = r.think or ""
    if any(tag in think for tag in _TAGS):
        raise ValueError("think text must not contain tag markers")
    return f"<think>{think}</think>{answer}"
