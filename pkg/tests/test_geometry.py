import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from detcal.geometry import Box, area, dice, intersection_area, iou


def test_box_rejects_unordered_corners():
    with pytest.raises(ValueError, match="x_max < x_min"):
        Box(5.0, 0.0, 4.0, 1.0)
    with pytest.raises(ValueError, match="y_max < y_min"):
        Box(0.0, 5.0, 1.0, 4.0)


def test_box_rejects_non_finite():
    with pytest.raises(ValueError, match="finite"):
        Box(0.0, 0.0, math.inf, 1.0)
    with pytest.raises(ValueError, match="finite"):
        Box(0.0, math.nan, 1.0, 1.0)


def test_degenerate_box_is_legal_and_empty():
    line = Box(2.0, 3.0, 2.0, 7.0)
    assert area(line) == 0.0
    assert iou(line, Box(0.0, 0.0, 10.0, 10.0)) == 0.0


def test_width_height_translate():
    b = Box(1.0, 2.0, 4.0, 6.0)
    assert b.width == 3.0
    assert b.height == 4.0
    moved = b.translate(10.0, -2.0)
    assert moved == Box(11.0, 0.0, 14.0, 4.0)


def test_area_simple():
    assert area(Box(0.0, 0.0, 3.0, 4.0)) == 12.0


def test_intersection_disjoint_and_touching():
    a = Box(0.0, 0.0, 1.0, 1.0)
    assert intersection_area(a, Box(2.0, 2.0, 3.0, 3.0)) == 0.0
    # shared edge only
    assert intersection_area(a, Box(1.0, 0.0, 2.0, 1.0)) == 0.0


def test_intersection_partial_and_nested():
    a = Box(0.0, 0.0, 4.0, 4.0)
    assert intersection_area(a, Box(2.0, 2.0, 6.0, 6.0)) == 4.0
    assert intersection_area(a, Box(1.0, 1.0, 2.0, 2.0)) == 1.0


def test_iou_identical_is_one():
    a = Box(0.0, 0.0, 5.0, 5.0)
    assert iou(a, a) == 1.0


def test_iou_hand_value():
    # I = 2, union = 4 + 4 - 2 = 6
    a = Box(0.0, 0.0, 2.0, 2.0)
    b = Box(1.0, 0.0, 3.0, 2.0)
    assert iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_iou_degenerate_pair_is_zero():
    a = Box(1.0, 1.0, 1.0, 1.0)
    assert iou(a, a) == 0.0


def test_dice_hand_value():
    # dice = 2I / (|A| + |B|) = 4 / 8
    a = Box(0.0, 0.0, 2.0, 2.0)
    b = Box(1.0, 0.0, 3.0, 2.0)
    assert dice(a, b) == pytest.approx(0.5, abs=1e-15)


def test_dice_disjoint_is_zero():
    assert dice(Box(0.0, 0.0, 1.0, 1.0), Box(5.0, 5.0, 6.0, 6.0)) == 0.0


_coord = st.integers(min_value=-50, max_value=50)


@st.composite
def boxes(draw, degenerate_ok: bool = False):
    x1 = draw(_coord)
    y1 = draw(_coord)
    min_extent = 0 if degenerate_ok else 1
    x2 = x1 + draw(st.integers(min_value=min_extent, max_value=40))
    y2 = y1 + draw(st.integers(min_value=min_extent, max_value=40))
    return Box(float(x1), float(y1), float(x2), float(y2))


@given(boxes(), boxes())
def test_iou_symmetric_and_bounded(a, b):
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0


@given(boxes(), boxes())
def test_dice_dominates_iou(a, b):
    # 2I/(|A|+|B|) >= I/(|A|+|B|-I) because I <= min(|A|, |B|)
    assert dice(a, b) >= iou(a, b) - 1e-15


@given(boxes(), boxes(), _coord, _coord)
def test_iou_translation_invariant_on_integer_grid(a, b, dx, dy):
    moved = iou(a.translate(float(dx), float(dy)), b.translate(float(dx), float(dy)))
    assert moved == iou(a, b)


@given(boxes(degenerate_ok=True), boxes(degenerate_ok=True))
def test_intersection_never_exceeds_either_area(a, b):
    inter = intersection_area(a, b)
    assert 0.0 <= inter <= min(area(a), area(b))
