import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uirft.geometry import BBox, Point
from uirft.parsing import (
    ACTION_TYPES,
    Action,
    ActionType,
    Mode,
    ParsedResponse,
    canonical_action_name,
    format_action,
    parse_response,
    serialize_response,
)


def test_canonical_think_response():
    raw = "<think>find icon</think> <answer>[{action: click, coordinate: [10, 20]}]</answer>"
    r = parse_response(raw, Mode.THINK)
    assert r.well_formed
    assert r.actions == [Action(ActionType.CLICK, Point(10, 20))]
    assert r.think == "find icon"
    # whitespace-delimited count of the raw text
    assert r.token_length == len(raw.split()) == 7


def test_missing_think_under_think_mode():
    r = parse_response("<answer>[{action: navigate_back}]</answer>", Mode.THINK)
    assert not r.well_formed and r.actions == []


def test_nothink_answer_only():
    r = parse_response("<answer>[{action: scroll}]</answer>", Mode.NOTHINK)
    assert r.well_formed and r.actions == [Action(ActionType.SCROLL)]


def test_nothink_rejects_think_tags():
    assert not parse_response("<think></think><answer>[{action: scroll}]</answer>", Mode.NOTHINK).well_formed


@pytest.mark.parametrize(
    "raw",
    [
        "<think>a</think><think>b</think><answer>[{action: scroll}]</answer>",
        "<answer>[{action: scroll}]</answer><think>a</think>",
        "<think>a</think><answer>[{action: fly}]</answer>",
        "<think>a</think><answer>[{action: click}]</answer>",
        "<think>a</think><answer>[{action: click, coordinate: [1]}]</answer>",
        "<think>a</think><answer>[{action: click, coordinate: [a, b]}]</answer>",
        "<think>a</think><answer></answer>",
        "<Think>a</Think><answer>[{action: scroll}]</answer>",
        "",
    ],
)
def test_malformed(raw):
    r = parse_response(raw, Mode.THINK)
    assert not r.well_formed and r.actions == []


def test_relaxed_payloads():
    r = parse_response('<think>x</think><answer>[{"action": "click", "coordinate": [3.5, 4]}]</answer>')
    assert r.actions == [Action(ActionType.CLICK, Point(3.5, 4))]
    r = parse_response("<think>x</think><answer>{action: open_app}</answer>")
    assert r.well_formed and r.action.kind is ActionType.OPEN_APP
    r = parse_response("  <think>x</think>\n<answer> [{action: CLICK, coordinate: [1, 2]}] </answer>  ")
    assert r.well_formed


def test_first_action_scored_and_non_click_coordinates_dropped():
    r = parse_response("<think></think><answer>[{action: scroll, coordinate: [1, 2]}, {action: click, coordinate: [3, 4]}]</answer>")
    assert r.action == Action(ActionType.SCROLL)
    assert len(r.actions) == 2


def test_box_coordinate():
    r = parse_response("<think></think><answer>[{action: click, coordinate: [0, 0, 10, 10]}]</answer>")
    assert r.action.bbox == BBox(0, 0, 10, 10) and r.action.coordinate is None


def test_canonical_action_name():
    assert canonical_action_name("click") is ActionType.CLICK
    assert canonical_action_name("NAVIGATE_BACK") is ActionType.NAVIGATE_BACK
    assert canonical_action_name("long_press") is None


def test_serialize_examples():
    r = ParsedResponse(think="t", actions=[Action(ActionType.CLICK, Point(10, 20))], well_formed=True)
    assert serialize_response(r, Mode.THINK) == "<think>t</think><answer>[{action: click, coordinate: [10, 20]}]</answer>"
    s = ParsedResponse(actions=[Action(ActionType.SCROLL)], well_formed=True)
    assert serialize_response(s, Mode.NOTHINK) == "<answer>[{action: scroll}]</answer>"
    with pytest.raises(ValueError):
        serialize_response(ParsedResponse(), Mode.THINK)


def test_action_invariant():
    with pytest.raises(ValueError):
        Action(ActionType.CLICK)
    with pytest.raises(ValueError):
        Action(ActionType.SCROLL, Point(1, 2))


coords = st.floats(0, 5000, allow_nan=False).map(lambda v: round(v, 2))
actions = st.sampled_from(ACTION_TYPES).flatmap(
    lambda k: st.builds(lambda x, y: Action(k, Point(x, y)), coords, coords) if k is ActionType.CLICK else st.just(Action(k))
)
words = st.lists(st.sampled_from(["look", "at", "the", "screen", "icon", "42"]), max_size=12).map(" ".join)


@settings(max_examples=300, deadline=None)
@given(st.lists(actions, min_size=1, max_size=3), words, st.sampled_from(list(Mode)))
def test_round_trip_and_mode_exclusivity(acts, think, mode):
    r = ParsedResponse(think=think if mode is Mode.THINK else None, actions=acts, well_formed=True)
    text = serialize_response(r, mode)
    back = parse_response(text, mode)
    assert back.well_formed and back.actions == acts
    other = Mode.NOTHINK if mode is Mode.THINK else Mode.THINK
    assert not parse_response(text, other).well_formed


@settings(max_examples=500, deadline=None)
@given(st.text(), st.sampled_from(list(Mode)))
def test_parse_is_total(raw, mode):
    r = parse_response(raw, mode)
    assert bool(r.actions) == r.well_formed
    assert r.token_length == len(raw.split())


tagged = st.lists(
    st.sampled_from(["<think>", "</think>", "<answer>", "</answer>", "[{action: click, coordinate: [1, 2]}]", "x", " ", "{", "]"]),
    max_size=10,
).map("".join)


@settings(max_examples=500, deadline=None)
@given(tagged, st.sampled_from(list(Mode)))
def test_parse_is_total_on_tag_soup(raw, mode):
    r = parse_response(raw, mode)
    if r.well_formed:
        assert r.actions
        assert serialize_response(r, mode)


def test_format_action():
    assert format_action(Action(ActionType.CLICK, Point(1.5, 2))) == "{action: click, coordinate: [1.5, 2]}"
