import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uirft.geometry import (
    BBox,
    ImageSize,
    Point,
    ResizePolicy,
    iou,
    point_in_bbox,
    scale_coordinates,
    smart_resize,
    within_screen_distance,
)

POLICY = ResizePolicy()


@pytest.mark.parametrize(
    "size, expected",
    [((2800, 2800), (2800, 2800)), ((5600, 5600), (3584, 3584)), ((1179, 2556), (1176, 2548))],
)
def test_smart_resize_examples(size, expected):
    assert smart_resize(ImageSize(*size), POLICY) == ImageSize(*expected)


def test_smart_resize_nearest_multiple_by_enumeration():
    # brute force: closest multiple of 28 to each side
    for side in (1179, 2556):
        best = min(range(28, 4000, 28), key=lambda m: abs(m - side))
        assert best in (1176, 2548)


@pytest.mark.parametrize(
    "pred, origin, expected",
    [((100, 200), (1176, 2548), (100, 200)), ((1792, 1792), (5600, 5600), (2800, 2800)), ((0, 0), (1080, 2400), (0, 0))],
)
def test_scale_coordinates_examples(pred, origin, expected):
    assert scale_coordinates(Point(*pred), ImageSize(*origin), POLICY) == Point(*expected)


def test_policy_validation():
    with pytest.raises(ValueError):
        ResizePolicy(factor=0)
    with pytest.raises(ValueError):
        ResizePolicy(min_pixels=10)  # below factor**2
    with pytest.raises(ValueError):
        ResizePolicy(min_pixels=10_000, max_pixels=5_000)
    with pytest.raises(ValueError):
        ImageSize(0, 10)


def test_extreme_aspect_ratio_rejected():
    with pytest.raises(ValueError):
        smart_resize(ImageSize(28 * 300, 28))


sizes = st.tuples(st.integers(1, 9000), st.integers(1, 9000)).filter(lambda s: max(s) / min(s) <= 150)


@settings(max_examples=300, deadline=None)
@given(sizes, st.sampled_from([28 * 28 * 4, 200_704, 3_211_264, 12_845_056]))
def test_smart_resize_contract(wh, max_pixels):
    pol = ResizePolicy(max_pixels=max_pixels)
    out = smart_resize(ImageSize(*wh), pol)
    assert out.width % 28 == 0 and out.height % 28 == 0
    assert pol.min_pixels <= out.width * out.height <= pol.max_pixels
    assert smart_resize(out, pol) == out


@settings(max_examples=200, deadline=None)
@given(sizes)
def test_smart_resize_preserves_aspect(wh):
    w, h = wh
    out = smart_resize(ImageSize(w, h))
    # rounding moves each side by at most one factor step, plus rescaling loss
    assert abs(out.width / out.height - w / h) <= (w / h) * (56 / max(out.height, 28) + 56 / max(out.width, 28)) + 1e-9


def test_scale_identity_when_resize_is_identity():
    origin = ImageSize(1176, 2548)
    for x, y in [(0, 0), (13.5, 99), (1176, 2548)]:
        assert scale_coordinates(Point(x, y), origin) == Point(x, y)


def test_point_in_bbox_examples():
    b = BBox(0, 0, 100, 100)
    assert point_in_bbox(Point(50, 50), b)
    assert not point_in_bbox(Point(150, 50), b)
    assert point_in_bbox(Point(100, 100), b)


def _grid_iou(a, b):
    # count unit pixels; valid for integer boxes
    def cells(box):
        return {(x, y) for x in range(int(box[0]), int(box[2])) for y in range(int(box[1]), int(box[3]))}

    ca, cb = cells(a), cells(b)
    union = len(ca | cb)
    return len(ca & cb) / union if union else 0.0


def test_iou_examples():
    assert iou(BBox(0, 0, 10, 10), BBox(0, 0, 10, 10)) == 1.0
    assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)) == 0.0
    assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)) == pytest.approx(1 / 3, abs=1e-12)
    assert _grid_iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(1 / 3)
    assert iou(BBox(3, 3, 3, 3), BBox(3, 3, 3, 3)) == 0.0


int_boxes = st.tuples(st.integers(0, 20), st.integers(0, 20), st.integers(0, 12), st.integers(0, 12)).map(
    lambda t: BBox(t[0], t[1], t[0] + t[2], t[1] + t[3])
)


@settings(max_examples=300, deadline=None)
@given(int_boxes, int_boxes)
def test_iou_matches_pixel_count(a, b):
    v = iou(a, b)
    assert v == pytest.approx(_grid_iou(a, b), abs=1e-12)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@settings(max_examples=200, deadline=None)
@given(int_boxes)
def test_center_inside_and_self_iou(b):
    assert point_in_bbox(b.center(), b)
    if b.area > 0:
        assert iou(b, b) == 1.0


def test_within_screen_distance_examples():
    s = ImageSize(1000, 1000)
    assert within_screen_distance(Point(500, 500), Point(500, 500), s)
    assert within_screen_distance(Point(600, 600), Point(500, 500), s)
    assert not within_screen_distance(Point(700, 700), Point(500, 500), s)
    assert math.hypot(100, 100) <= 0.14 * math.hypot(1000, 1000) < math.hypot(200, 200)
    with pytest.raises(ValueError):
        within_screen_distance(Point(0, 0), Point(0, 0), s, ratio=0.0)


def test_bbox_helpers():
    b = BBox(10, 20, 30, 60)
    assert (b.width, b.height, b.area) == (20, 40, 800)
    assert b.center() == Point(20, 40)
    assert b.within(ImageSize(30, 60)) and not b.within(ImageSize(29, 60))
    assert not BBox(5, 0, 1, 1).is_valid()
    assert np.isclose(ImageSize(3, 4).diagonal, 5.0)
