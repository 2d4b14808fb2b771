"""Coordinate spaces, box predicates and the smart-resize / rescale pair.

Everything here is a pure function over sizes and coordinates; no pixel
data ever flows through this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

MAX_ASPECT_RATIO = 200
DEFAULT_FACTOR = 28
DEFAULT_MAX_PIXELS = 12845056


class Point(NamedTuple):
    x: float
    y: float


class BBox(NamedTuple):
    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    def center(self) -> Point:
        return Point((self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2)

    def is_valid(self) -> bool:
        return all(math.isfinite(v) for v in self) and self.x1 <= self.x2 and self.y1 <= self.y2

    def within(self, size: "ImageSize") -> bool:
        return self.is_valid() and self.x1 >= 0 and self.y1 >= 0 and self.x2 <= size.width and self.y2 <= size.height


@dataclass(frozen=True)
class ImageSize:
    width: int
    height: int

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ValueError(f"image size must be integral, got {self.width}x{self.height}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


@dataclass(frozen=True)
class ResizePolicy:
    """Rounding granularity and area bounds used by :func:`smart_resize`.

    ``min_pixels`` defaults to ``factor ** 2``, which never triggers the
    upscaling branch for inputs that already round to at least one factor
    per side.
    """

    factor: int = DEFAULT_FACTOR
    min_pixels: int | None = None
    max_pixels: int = DEFAULT_MAX_PIXELS

    def __post_init__(self):
        if self.factor < 1:
            raise ValueError(f"factor must be >= 1, got {self.factor}")
        if self.min_pixels is None:
            object.__setattr__(self, "min_pixels", self.factor * self.factor)
        if self.min_pixels < self.factor * self.factor:
            raise ValueError(f"min_pixels must be >= factor**2 ({self.factor ** 2}), got {self.min_pixels}")
        if self.min_pixels > self.max_pixels:
            raise ValueError(f"min_pixels ({self.min_pixels}) exceeds max_pixels ({self.max_pixels})")


def _floor_scaled(side: int, other: int, bound: int, factor: int) -> int:
    # floor(side * sqrt(bound / (side * other)) / factor) * factor, in exact integers
    return max(factor, math.isqrt(side * bound // other) // factor * factor)


def _ceil_scaled(side: int, other: int, bound: int, factor: int) -> int:
    # smallest multiple m of factor with m >= side * sqrt(bound / (side * other)),
    # i.e. m**2 * other >= side * bound
    target = side * bound
    m = math.isqrt(target // other) // factor
    while (m * factor) ** 2 * other < target:
        m += 1
    return max(factor, m * factor)


def smart_resize(size: ImageSize, policy: ResizePolicy = ResizePolicy()) -> ImageSize:
    """Resize to factor-multiple sides whose area lies in the policy bounds.

    Each side is first rounded to the nearest multiple of ``policy.factor``.
    If the rounded area exceeds ``max_pixels`` both sides are scaled by
    ``sqrt(max_pixels / area)`` and floored to multiples of the factor; if it
    falls below ``min_pixels`` they are scaled up and ceiled instead. The
    scale is computed from the original size, with exact integer arithmetic
    so that results such as 5600 -> 3584 do not depend on float rounding.
    When a side is already pinned at one factor step the long side is
    trimmed so the area bound still holds; the aspect ratio then gives way.

    Raises:
        ValueError: if the aspect ratio exceeds 200.
    """
    h, w, f = size.height, size.width, policy.factor
    if max(h, w) / min(h, w) > MAX_ASPECT_RATIO:
        raise ValueError(f"aspect ratio must not exceed {MAX_ASPECT_RATIO}, got {size.width}x{size.height}")
    h_bar = max(f, round(h / f) * f)
    w_bar = max(f, round(w / f) * f)
    if h_bar * w_bar > policy.max_pixels:
        h_bar = _floor_scaled(h, w, policy.max_pixels, f)
        w_bar = _floor_scaled(w, h, policy.max_pixels, f)
    elif h_bar * w_bar < policy.min_pixels:
        h_bar = _ceil_scaled(h, w, policy.min_pixels, f)
        w_bar = _ceil_scaled(w, h, policy.min_pixels, f)
    if h_bar * w_bar > policy.max_pixels:
        # short side already pinned at one factor step: trim the long side
        if h_bar >= w_bar:
            h_bar = max(f, policy.max_pixels // w_bar // f * f)
        else:
            w_bar = max(f, policy.max_pixels // h_bar // f * f)
    return ImageSize(width=w_bar, height=h_bar)


def scale_coordinates(pred: Point, origin: ImageSize, policy: ResizePolicy = ResizePolicy()) -> Point:
    """Map a point predicted on the resized image back to original pixels."""
    resized = smart_resize(origin, policy)
    return Point(pred.x * origin.width / resized.width, pred.y * origin.height / resized.height)


def point_in_bbox(p: Point, b: BBox) -> bool:
    """Boundary-inclusive containment."""
    return b.x1 <= p[0] <= b.x2 and b.y1 <= p[1] <= b.y2


def iou(a: BBox, b: BBox) -> float:
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    inter = max(0.0, ix) * max(0.0, iy)
    union = BBox(*a).area + BBox(*b).area - inter
    if union <= 0:
        return 0.0
    return inter / union


def within_screen_distance(pred: Point, gt: Point, size: ImageSize, ratio: float = 0.14) -> bool:
    """True when ``pred`` lies within ``ratio`` of the screen diagonal from ``gt``."""
    if not 0 < ratio <= 1:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    return math.hypot(pred[0] - gt[0], pred[1] - gt[1]) <= ratio * size.diagonal
