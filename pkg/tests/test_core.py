import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sketchedit.core import (
    FULL_FRAME,
    BlurParams,
    EditOperation,
    FrameDims,
    Rect,
    TextParams,
    TimeInterval,
    ValidationError,
    ZoomParams,
    interval_distance,
    interval_intersects,
    params_match_operation,
    rect_clamp,
    rect_from_pixels,
    rect_iou,
    rect_to_pixels,
)

intervals = st.builds(
    lambda a, b: TimeInterval(min(a, b), max(a, b) + 0.25),
    st.floats(0, 100, allow_nan=False),
    st.floats(0, 100, allow_nan=False),
)

rects = st.builds(
    lambda x, y, w, h: Rect(x * (1 - w), y * (1 - h), w, h),
    st.floats(0, 1),
    st.floats(0, 1),
    st.floats(0.01, 1),
    st.floats(0.01, 1),
)


class TestTimeInterval:
    def test_rejects_inverted(self):
        with pytest.raises(ValidationError):
            TimeInterval(5.0, 5.0)
        with pytest.raises(ValidationError):
            TimeInterval(-1.0, 3.0)

    def test_intersects_overlap(self):
        assert interval_intersects(TimeInterval(10, 20), TimeInterval(15, 25))

    def test_intersects_half_open_touching(self):
        assert not interval_intersects(TimeInterval(10, 20), TimeInterval(20, 30))

    def test_intersects_identity(self):
        assert interval_intersects(TimeInterval(0, 5), TimeInterval(0, 5))

    def test_distance_gap(self):
        assert interval_distance(TimeInterval(10, 20), TimeInterval(25, 35)) == 5
        assert interval_distance(TimeInterval(0, 10), TimeInterval(15, 25)) == 5

    def test_distance_intersecting_is_zero(self):
        assert interval_distance(TimeInterval(10, 20), TimeInterval(15, 25)) == 0

    @given(intervals, intervals)
    def test_symmetry(self, a, b):
        assert interval_intersects(a, b) == interval_intersects(b, a)
        assert interval_distance(a, b) == interval_distance(b, a)

    @given(intervals, intervals)
    def test_distance_zero_iff_intersecting(self, a, b):
        if interval_intersects(a, b):
            assert interval_distance(a, b) == 0
        else:
            assert interval_distance(a, b) >= 0


class TestRect:
    def test_invariants(self):
        with pytest.raises(ValidationError):
            Rect(0.5, 0.5, 0.6, 0.1)  # x + w > 1
        with pytest.raises(ValidationError):
            Rect(0, 0, 0, 0.5)  # degenerate
        with pytest.raises(ValidationError):
            Rect(-0.1, 0, 0.5, 0.5)

    def test_iou_identity(self):
        r = Rect(0.1, 0.2, 0.3, 0.4)
        assert rect_iou(r, r) == 1.0

    def test_iou_disjoint(self):
        assert rect_iou(Rect(0, 0, 0.2, 0.2), Rect(0.5, 0.5, 0.2, 0.2)) == 0.0

    def test_iou_partial_overlap(self):
        # inter = 0.25 * 0.5 = 0.125, union = 0.375
        a = Rect(0, 0, 0.5, 0.5)
        b = Rect(0.25, 0, 0.5, 0.5)
        assert rect_iou(a, b) == pytest.approx(1 / 3, abs=1e-9)

    @given(rects, rects)
    def test_iou_symmetric_and_bounded(self, a, b):
        v = rect_iou(a, b)
        assert 0.0 <= v <= 1.0
        assert v == rect_iou(b, a)

    def test_clamp_shifts_into_bounds(self):
        assert rect_clamp(0.9, 0.9, 0.3, 0.3) == Rect(0.7, 0.7, 0.3, 0.3)
        assert rect_clamp(-0.1, 0, 0.5, 0.5) == Rect(0.0, 0.0, 0.5, 0.5)

    def test_clamp_in_bounds_unchanged(self):
        assert rect_clamp(0.2, 0.3, 0.4, 0.5) == Rect(0.2, 0.3, 0.4, 0.5)

    def test_clamp_shrinks_oversized(self):
        assert rect_clamp(0.0, 0.0, 2.0, 3.0) == FULL_FRAME

    def test_clamp_rejects_degenerate(self):
        with pytest.raises(ValidationError):
            rect_clamp(0, 0, 0.0, 0.5)
        with pytest.raises(ValidationError):
            rect_clamp(0, 0, 0.5, -1.0)

    @given(
        st.floats(-2, 2),
        st.floats(-2, 2),
        st.floats(0.001, 3),
        st.floats(0.001, 3),
    )
    def test_clamp_idempotent(self, x, y, w, h):
        once = rect_clamp(x, y, w, h)
        twice = rect_clamp(once.x, once.y, once.w, once.h)
        assert once == twice


class TestPixelConversion:
    def test_full_frame(self):
        d = FrameDims(1280, 720)
        p = rect_to_pixels(FULL_FRAME, d)
        assert (p.x, p.y, p.w, p.h) == (0, 0, 1280, 720)

    def test_quarter(self):
        d = FrameDims(1280, 720)
        p = rect_to_pixels(Rect(0.5, 0.5, 0.25, 0.25), d)
        assert (p.x, p.y, p.w, p.h) == (640, 360, 320, 180)

    def test_inverse(self):
        d = FrameDims(1280, 720)
        p = rect_to_pixels(Rect(0.5, 0.5, 0.25, 0.25), d)
        r = rect_from_pixels(p, d)
        assert r == Rect(0.5, 0.5, 0.25, 0.25)

    @given(rects)
    def test_round_trip_error_bound(self, r):
        d = FrameDims(1280, 720)
        back = rect_from_pixels(rect_to_pixels(r, d), d)
        tol = 1.0 / min(d.width_px, d.height_px) + 1e-9
        for name in ("x", "y", "w", "h"):
            assert abs(getattr(back, name) - getattr(r, name)) <= tol


class TestEditParameters:
    def test_text_content_cap(self):
        with pytest.raises(ValidationError):
            TextParams(content="x" * 101)
        TextParams(content="x" * 100)

    def test_blur_degree_range(self):
        with pytest.raises(ValidationError):
            BlurParams(degree=0.0)
        with pytest.raises(ValidationError):
            BlurParams(degree=1.5)
        BlurParams(degree=1.0)

    def test_zoom_duration_positive(self):
        with pytest.raises(ValidationError):
            ZoomParams(animation_duration_s=0)

    def test_variant_matches_operation(self):
        assert params_match_operation(TextParams(), EditOperation.TEXT)
        assert not params_match_operation(TextParams(), EditOperation.BLUR)

    def test_operation_set_is_closed(self):
        assert {op.value for op in EditOperation} == {
            "text",
            "image",
            "shape",
            "blur",
            "cut",
            "crop",
            "zoom",
        }


def test_interval_helpers():
    t = TimeInterval(10, 21)
    assert t.length_s == 11
    assert t.midpoint_s == 15.5
    assert math.isclose(TimeInterval(0, 5).midpoint_s, 2.5)
