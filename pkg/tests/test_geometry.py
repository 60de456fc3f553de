import math

import pytest
from hypothesis import given, strategies as st

from groundsight.errors import ClampedToEmpty
from groundsight.geometry import (
    BBox,
    ImageDims,
    clamp_to_image,
    full_image_box,
    intersect,
    iou,
    raster_bounds,
)


def boxes(max_coord: float = 100.0):
    coords = st.floats(min_value=-max_coord, max_value=max_coord, allow_nan=False, width=32)
    return st.builds(
        lambda x0, y0, w, h: BBox(x0, y0, x0 + w, y0 + h),
        coords,
        coords,
        st.floats(min_value=0, max_value=max_coord, allow_nan=False, width=32),
        st.floats(min_value=0, max_value=max_coord, allow_nan=False, width=32),
    )


class TestBBox:
    def test_valid_construction(self):
        b = BBox(1.0, 2.0, 3.0, 5.0)
        assert b.width == 2.0
        assert b.height == 3.0
        assert b.area() == 6.0
        assert b.as_tuple() == (1.0, 2.0, 3.0, 5.0)

    def test_zero_area_box_is_valid(self):
        b = BBox(2.0, 2.0, 2.0, 2.0)
        assert b.area() == 0.0

    @pytest.mark.parametrize("bad", [(3, 0, 2, 5), (0, 5, 2, 3)])
    def test_inverted_box_rejected(self, bad):
        with pytest.raises(ValueError):
            BBox(*bad)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            BBox(0, 0, math.nan, 1)
        with pytest.raises(ValueError):
            BBox(0, 0, math.inf, 1)


class TestIntersect:
    def test_overlapping(self):
        got = intersect(BBox(0, 0, 2, 2), BBox(1, 1, 3, 3))
        assert got == BBox(1, 1, 2, 2)

    def test_disjoint_is_none(self):
        assert intersect(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)) is None

    def test_edge_touch_is_none(self):
        assert intersect(BBox(0, 0, 1, 1), BBox(1, 0, 2, 1)) is None

    def test_corner_touch_is_none(self):
        assert intersect(BBox(0, 0, 1, 1), BBox(1, 1, 2, 2)) is None

    @given(boxes(), boxes())
    def test_commutative(self, a, b):
        assert intersect(a, b) == intersect(b, a)

    @given(boxes())
    def test_self_intersection_nonzero(self, b):
        if b.area() > 0:
            assert intersect(b, b) == b


class TestIou:
    def test_worked_example(self):
        # overlap 1x1 = 1, union 4 + 4 - 1 = 7
        assert iou(BBox(0, 0, 2, 2), BBox(1, 1, 3, 3)) == pytest.approx(1 / 7)

    def test_identical_boxes(self):
        assert iou(BBox(0, 0, 5, 4), BBox(0, 0, 5, 4)) == 1.0

    def test_disjoint_zero(self):
        assert iou(BBox(0, 0, 1, 1), BBox(5, 5, 6, 6)) == 0.0

    def test_two_degenerate_boxes(self):
        # both areas zero -> union zero -> defined as 0
        assert iou(BBox(1, 1, 1, 1), BBox(1, 1, 1, 1)) == 0.0

    def test_degenerate_vs_normal(self):
        assert iou(BBox(1, 1, 1, 1), BBox(0, 0, 2, 2)) == 0.0

    @given(boxes(), boxes())
    def test_symmetry_and_bounds(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0

    @given(boxes())
    def test_self_iou_one_when_nonzero_area(self, b):
        if b.area() > 0:
            assert iou(b, b) == pytest.approx(1.0)


class TestClamp:
    def test_clamp_oversized(self):
        got = clamp_to_image(BBox(-5, -5, 10, 10), ImageDims(8, 8))
        assert got == BBox(0, 0, 8, 8)

    def test_inside_untouched(self):
        b = BBox(1, 1, 4, 5)
        assert clamp_to_image(b, ImageDims(8, 8)) == b

    def test_fully_outside_raises(self):
        with pytest.raises(ClampedToEmpty):
            clamp_to_image(BBox(9, 9, 12, 12), ImageDims(8, 8))

    def test_edge_sliver_raises(self):
        # clamps to a zero-width strip at the right edge
        with pytest.raises(ClampedToEmpty):
            clamp_to_image(BBox(8, 0, 12, 4), ImageDims(8, 8))


class TestRasterBounds:
    def test_fractional_box_expands(self):
        assert raster_bounds(BBox(0.2, 0.7, 3.1, 4.0)) == (0, 0, 4, 4)

    def test_integer_box_unchanged(self):
        assert raster_bounds(BBox(1, 2, 3, 4)) == (1, 2, 3, 4)

    def test_clips_to_frame(self):
        assert raster_bounds(BBox(-2.5, 1.0, 9.9, 20.0), ImageDims(8, 8)) == (0, 1, 8, 8)


def test_full_image_box():
    assert full_image_box(ImageDims(640, 480)) == BBox(0, 0, 640, 480)


def test_image_dims_validation():
    with pytest.raises(ValueError):
        ImageDims(0, 5)
    with pytest.raises(ValueError):
        ImageDims(5, -1)
