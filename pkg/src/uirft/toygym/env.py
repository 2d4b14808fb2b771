"""Seeded generator of synthetic single-screen GUI tasks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import BBox, ImageSize
from ..parsing import ActionType, canonical_action_name
from ..tasks import TaskSample

# action histogram of the curated 136-sample mobile training set
DEFAULT_MIXTURE = {
    ActionType.CLICK: 101,
    ActionType.SCROLL: 5,
    ActionType.INPUT_TEXT: 2,
    ActionType.NAVIGATE_BACK: 9,
    ActionType.OPEN_APP: 19,
}

SCREEN_SIZES = {
    "mobile": [(1080, 2400), (1179, 2556), (1080, 1920), (1440, 3200)],
    "desktop": [(1920, 1080), (2560, 1440), (3840, 2160)],
    "web": [(1280, 800), (1920, 1080), (5120, 2880)],
}

ICON_NAMES = [
    "settings", "search", "menu", "back arrow", "profile", "cart", "bell", "share",
    "home", "camera", "microphone", "heart", "star", "trash", "edit", "download",
]
TEXT_NAMES = [
    "Sign in", "Continue", "Cancel", "Submit", "Next", "Learn more", "Add to cart",
    "Save", "Skip", "Done", "Help", "Log out", "Checkout", "Subscribe",
]
APPS = ["Calendar", "Gmail", "Maps", "Chrome", "Clock", "Contacts", "Photos", "Settings"]
TEXTS = ["pizza near me", "hello world", "weather today", "flight to Paris", "42"]
NOISE_ACTIONS = ["long_press", "wait"]


@dataclass(frozen=True)
class ScreenElement:
    name: str
    cells: tuple[int, int, int, int]  # col0, row0, cols, rows
    element_type: str


@dataclass(frozen=True)
class SyntheticScreen:
    grid: int
    elements: tuple[ScreenElement, ...]

    @property
    def distractors(self) -> int:
        return len(self.elements) - 1

    def bbox(self, element: ScreenElement, size: ImageSize) -> BBox:
        c0, r0, nc, nr = element.cells
        cw, ch = size.width / self.grid, size.height / self.grid
        return BBox(c0 * cw, r0 * ch, (c0 + nc) * cw, (r0 + nr) * ch)


@dataclass
class TaskConfig:
    grid: int = 16
    mixture: dict = field(default_factory=lambda: dict(DEFAULT_MIXTURE))
    platforms: dict = field(default_factory=lambda: {"mobile": 1.0})
    hard_fraction: float = 0.25
    easy_cells: tuple[int, int] = (4, 8)
    hard_cells: tuple[int, int] = (1, 2)
    easy_distractors: tuple[int, int] = (2, 4)
    hard_distractors: tuple[int, int] = (8, 12)
    # fraction of samples corrupted into quality-filter fodder
    noise_fraction: float = 0.0

    def __post_init__(self):
        mix = {}
        for k, v in self.mixture.items():
            kind = canonical_action_name(k.value if isinstance(k, ActionType) else k)
            if kind is None:
                raise ValueError(f"unknown action type in mixture: {k!r}")
            if v < 0:
                raise ValueError(f"mixture weight for {kind.value} must be >= 0")
            mix[kind] = mix.get(kind, 0) + float(v)
        if sum(mix.values()) <= 0:
            raise ValueError("mixture weights must sum to a positive value")
        self.mixture = mix
        for p, w in self.platforms.items():
            if p not in SCREEN_SIZES or w < 0:
                raise ValueError(f"bad platform weight {p}={w}")
        if sum(self.platforms.values()) <= 0:
            raise ValueError("platform weights must sum to a positive value")
        if self.grid < 4:
            raise ValueError("grid must be at least 4 cells per side")
        for lo, hi in (self.easy_cells, self.hard_cells):
            if not 1 <= lo <= hi <= self.grid:
                raise ValueError(f"element size range ({lo}, {hi}) must lie within 1..grid")
        if not 0 <= self.hard_fraction <= 1 or not 0 <= self.noise_fraction <= 1:
            raise ValueError("fractions must lie in [0, 1]")


def click_suite(**overrides) -> TaskConfig:
    """Click-only, easy-layout configuration used for convergence runs."""
    return TaskConfig(**{"mixture": {ActionType.CLICK: 1.0}, "hard_fraction": 0.0, **overrides})


def apportion(weights: dict, count: int) -> dict:
    """Largest-remainder split of ``count`` by ``weights`` (ties by insertion order)."""
    total = sum(weights.values())
    quotas = {k: count * w / total for k, w in weights.items()}
    out = {k: int(q) for k, q in quotas.items()}
    short = count - sum(out.values())
    order = sorted(quotas, key=lambda k: -(quotas[k] - out[k]))
    for k in order[:short]:
        out[k] += 1
    return out


def _place(rng, grid, sizes, taken) -> tuple[int, int, int, int] | None:
    for _ in range(200):
        nc, nr = sizes
        c0 = int(rng.integers(0, grid - nc + 1))
        r0 = int(rng.integers(0, grid - nr + 1))
        cells = {(c, r) for c in range(c0, c0 + nc) for r in range(r0, r0 + nr)}
        if not cells & taken:
            taken |= cells
            return (c0, r0, nc, nr)
    return None


def make_screen(rng, grid: int, size_range, distractor_range) -> SyntheticScreen:
    n_elems = 1 + int(rng.integers(distractor_range[0], distractor_range[1] + 1))
    taken: set = set()
    elements = []
    names = [(n, "icon") for n in ICON_NAMES] + [(n, "text") for n in TEXT_NAMES]
    picks = rng.permutation(len(names))[:n_elems]
    for i in picks:
        name, etype = names[i]
        cells = None
        lo, hi = size_range
        while cells is None and hi >= 1:
            dims = (int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1)))
            cells = _place(rng, grid, dims, taken)
            if cells is None:
                lo, hi = max(1, lo - 1), hi - 1
        if cells is not None:
            elements.append(ScreenElement(name, cells, etype))
    return SyntheticScreen(grid, tuple(elements))


def _instruction(kind: ActionType, rng) -> tuple[str, str | None]:
    if kind is ActionType.SCROLL:
        return str(rng.choice(["Scroll down", "Scroll up the list", "Scroll to the bottom"])), None
    if kind is ActionType.NAVIGATE_BACK:
        return "Go back to the previous screen", None
    if kind is ActionType.OPEN_APP:
        app = str(rng.choice(APPS))
        return f"Open {app}", app
    text = str(rng.choice(TEXTS))
    return f"Type '{text}' into the search box", text


def generate_tasks(seed: int, count: int, config: TaskConfig | None = None) -> list[TaskSample]:
    """Deterministic list of ``count`` tasks.

    Action types follow ``config.mixture`` exactly (largest-remainder
    apportionment, then a seeded shuffle), so 136 samples with the default
    mixture reproduce its histogram.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    config = config or TaskConfig()
    rng = np.random.default_rng(seed)
    kinds = [k for k, n in apportion(config.mixture, count).items() for _ in range(n)]
    kinds = [kinds[i] for i in rng.permutation(count)]
    plats = list(config.platforms)
    pw = np.array([config.platforms[p] for p in plats], dtype=float)
    pw /= pw.sum()

    tasks = []
    for i, kind in enumerate(kinds):
        platform = plats[int(rng.choice(len(plats), p=pw))]
        sizes = SCREEN_SIZES[platform]
        w, h = sizes[int(rng.integers(len(sizes)))]
        size = ImageSize(w, h)
        hard = bool(rng.random() < config.hard_fraction)
        sid = f"s{seed}-{i:05d}"
        noisy = bool(rng.random() < config.noise_fraction)
        if kind is ActionType.CLICK:
            screen = make_screen(
                rng,
                config.grid,
                config.hard_cells if hard else config.easy_cells,
                config.hard_distractors if hard else config.easy_distractors,
            )
            target = screen.elements[int(rng.integers(len(screen.elements)))]
            noun = "icon" if target.element_type == "icon" else "button"
            task = TaskSample(
                id=sid,
                platform=platform,
                image_size=size,
                instruction=f"Click the {target.name} {noun}",
                action=kind.value,
                bbox=screen.bbox(target, size),
                element_type=target.element_type,
                difficulty="hard" if hard else "easy",
            )
            if noisy:
                task = TaskSample(**{**task.__dict__, "bbox": None})
        else:
            text, arg = _instruction(kind, rng)
            action = kind.value
            if noisy:
                action = str(rng.choice(NOISE_ACTIONS))
            task = TaskSample(
                id=sid,
                platform=platform,
                image_size=size,
                instruction=text,
                action=action,
                argument=arg,
                difficulty="hard" if hard else "easy",
            )
        tasks.append(task)
    return tasks


def action_histogram(tasks) -> dict[str, int]:
    hist: dict[str, int] = {}
    for t in tasks:
        hist[t.action] = hist.get(t.action, 0) + 1
    return hist
