"""The TaskSample record shared by the environment, selection and evaluation."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .geometry import BBox, ImageSize, Point
from .parsing import ActionType, canonical_action_name

PLATFORMS = ("mobile", "desktop", "web")
ELEMENT_TYPES = ("icon", "text")


@dataclass(frozen=True)
class TaskSample:
    """One single-screen GUI task.

    ``action`` keeps the raw action name so that corpora containing actions
    outside the five-type space (``long_press``, ``wait``) can still be
    loaded and then dropped by the quality filter.
    """

    id: str
    platform: str
    image_size: ImageSize
    instruction: str
    action: str
    bbox: BBox | None = None
    point: Point | None = None
    argument: str | None = None
    element_type: str | None = None
    difficulty: str | None = None

    @property
    def action_type(self) -> ActionType | None:
        return canonical_action_name(self.action)

    @property
    def target_point(self) -> Point | None:
        """Ground-truth point for distance scoring: explicit point, else bbox center."""
        if self.point is not None:
            return self.point
        return self.bbox.center() if self.bbox is not None else None

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "platform": self.platform,
            "image_size": [self.image_size.width, self.image_size.height],
            "instruction": self.instruction,
            "action": self.action,
            "bbox": list(self.bbox) if self.bbox is not None else None,
            "point": list(self.point) if self.point is not None else None,
            "argument": self.argument,
            "element_type": self.element_type,
            "difficulty": self.difficulty,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSample":
        try:
            w, h = d["image_size"]
            bbox = d.get("bbox")
            point = d.get("point")
            return cls(
                id=str(d["id"]),
                platform=d.get("platform", "mobile"),
                image_size=ImageSize(int(w), int(h)),
                instruction=d.get("instruction", ""),
                action=d["action"],
                bbox=BBox(*map(float, bbox)) if bbox is not None else None,
                point=Point(*map(float, point)) if point is not None else None,
                argument=d.get("argument"),
                element_type=d.get("element_type"),
                difficulty=d.get("difficulty"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"invalid task record {d!r}: {exc}") from exc


def iter_jsonl(path: str | os.PathLike) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def dumps_jsonl(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r) + "\n" for r in records)


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_tasks(path: str | os.PathLike) -> list[TaskSample]:
    return [TaskSample.from_dict(d) for d in iter_jsonl(path)]


def save_tasks(path: str | os.PathLike, tasks: Iterable[TaskSample]) -> None:
    atomic_write(path, dumps_jsonl(t.to_dict() for t in tasks))
