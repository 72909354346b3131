import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from composekit.geometry import (
    GRID_SIZE,
    GridCell,
    NormalizedBox,
    PixelBox,
    center_aligned_iou,
    decode_cell,
    denormalize_box,
    encode_cell,
    iou,
    normalize_box,
    pad_to_square,
)
from oracles import rasterized_iou


class TestPixelBox:
    def test_rejects_inverted(self):
        with pytest.raises(ValueError):
            PixelBox(10, 10, 5, 20)

    def test_rejects_zero_area(self):
        with pytest.raises(ValueError):
            PixelBox(10, 10, 10, 20)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            PixelBox(0, 0, math.inf, 10)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            PixelBox(-1, 0, 10, 10)

    def test_xywh_round_trip(self):
        box = PixelBox(3, 4, 13, 24)
        assert PixelBox.from_xywh(*box.as_xywh()) == box


class TestPadToSquare:
    def test_already_square(self):
        frame = pad_to_square(100, 100)
        assert (frame.s, frame.offset_x, frame.offset_y) == (100, 0, 0)

    def test_landscape_even_padding(self):
        frame = pad_to_square(100, 80)
        assert (frame.s, frame.offset_x, frame.offset_y) == (100, 0, 10)

    def test_odd_pixel_goes_right(self):
        frame = pad_to_square(99, 100)
        assert (frame.s, frame.offset_x, frame.offset_y) == (100, 0, 0)

    def test_never_shrinks(self):
        for w, h in [(5, 9), (9, 5), (1, 1), (640, 480)]:
            frame = pad_to_square(w, h)
            assert frame.s >= w and frame.s >= h
            assert frame.s == max(w, h)

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            pad_to_square(0, 10)


class TestNormalizeBox:
    def test_plain_frame(self):
        nbox = normalize_box(PixelBox(20, 10, 40, 90), pad_to_square(100, 100))
        assert nbox == NormalizedBox(0.30, 0.90, 0.20, 0.80)

    def test_full_square(self):
        nbox = normalize_box(PixelBox(0, 0, 100, 100), pad_to_square(100, 100))
        assert nbox == NormalizedBox(0.5, 1.0, 1.0, 1.0)

    def test_offset_frame(self):
        # 100x80 image pads to s=100 with offset_y=10; y_max 90 -> 100 -> 1.0
        nbox = normalize_box(PixelBox(20, 10, 40, 90), pad_to_square(100, 80))
        assert nbox.y_stand == pytest.approx(1.0)
        assert nbox.x_stand == pytest.approx(0.30)

    def test_denormalize_examples(self):
        frame = pad_to_square(100, 100)
        box = denormalize_box(NormalizedBox(0.5, 1.0, 1.0, 1.0), frame)
        assert (box.x_min, box.y_min, box.x_max, box.y_max) == (0, 0, 100, 100)
        box = denormalize_box(NormalizedBox(0.30, 0.90, 0.20, 0.80), frame)
        assert (box.x_min, box.y_min, box.x_max, box.y_max) == pytest.approx((20, 10, 40, 90))

    @given(
        w=st.integers(2, 640),
        h=st.integers(2, 640),
        data=st.data(),
    )
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, w, h, data):
        frame = pad_to_square(w, h)
        x0 = data.draw(st.floats(0, w - 1))
        y0 = data.draw(st.floats(0, h - 1))
        x1 = data.draw(st.floats(x0 + 0.5, w))
        y1 = data.draw(st.floats(y0 + 0.5, h))
        box = PixelBox(x0, y0, x1, y1)
        back = denormalize_box(normalize_box(box, frame), frame)
        tol = 1e-6 * frame.s
        for a, b in zip((box.x_min, box.y_min, box.x_max, box.y_max),
                        (back.x_min, back.y_min, back.x_max, back.y_max)):
            assert abs(a - b) < tol


class TestGridCodec:
    def test_origin(self):
        cell = encode_cell(0.0, 0.0)
        assert (cell.col, cell.row, cell.index) == (0, 0, 0)

    def test_clamped_upper_edge(self):
        cell = encode_cell(1.0, 1.0)
        assert (cell.col, cell.row, cell.index) == (14, 14, 224)

    def test_mid_cell(self):
        cell = encode_cell(0.5, 0.9)
        assert (cell.col, cell.row, cell.index) == (7, 13, 202)

    def test_decode_centers(self):
        assert decode_cell(GridCell.from_index(0)) == pytest.approx((0.5 / 15, 0.5 / 15))
        assert decode_cell(GridCell.from_index(224)) == pytest.approx((14.5 / 15, 14.5 / 15))

    def test_exhaustive_round_trip(self):
        for index in range(GRID_SIZE * GRID_SIZE):
            cell = GridCell.from_index(index)
            u, v = decode_cell(cell)
            assert encode_cell(u, v) == cell

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            encode_cell(1.0001, 0.5)
        with pytest.raises(ValueError):
            encode_cell(0.5, -0.0001)
        with pytest.raises(ValueError):
            GridCell(15, 0)
        with pytest.raises(ValueError):
            GridCell.from_index(225)

    @given(st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=300, deadline=None)
    def test_total_on_unit_square(self, u, v):
        cell = encode_cell(u, v)
        assert 0 <= cell.index <= 224


class TestIoU:
    def test_identical(self):
        box = PixelBox(5, 5, 20, 30)
        assert iou(box, box) == 1.0

    def test_disjoint(self):
        assert iou(PixelBox(0, 0, 10, 10), PixelBox(20, 20, 30, 30)) == 0.0

    def test_touching_edges_are_disjoint(self):
        assert iou(PixelBox(0, 0, 10, 10), PixelBox(10, 0, 20, 10)) == 0.0

    def test_known_overlap(self):
        assert iou(PixelBox(0, 0, 2, 2), PixelBox(1, 1, 3, 3)) == pytest.approx(1 / 7)

    def test_matches_rasterization_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a = _random_int_box(rng, 64)
            b = _random_int_box(rng, 64)
            got = iou(PixelBox(*a), PixelBox(*b))
            want = rasterized_iou(a, b, 64)
            assert got == pytest.approx(want, abs=1e-9)

    @given(data=st.data())
    @settings(max_examples=200, deadline=None)
    def test_symmetric_and_bounded(self, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        a = PixelBox(*_random_float_box(rng, 100))
        b = PixelBox(*_random_float_box(rng, 100))
        v = iou(a, b)
        assert 0.0 <= v <= 1.0
        assert v == iou(b, a)


class TestCenterAlignedIoU:
    def test_equal_sizes(self):
        assert center_aligned_iou((10, 20), (10, 20)) == 1.0

    def test_half_overlap(self):
        assert center_aligned_iou((10, 20), (10, 10)) == pytest.approx(0.5)

    def test_tiny_vs_huge(self):
        assert center_aligned_iou((1, 1), (100, 100)) == pytest.approx(1e-4)

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            center_aligned_iou((0, 10), (5, 5))

    def test_matches_physically_centered_boxes(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            wa, ha, wb, hb = rng.uniform(0.5, 40, size=4)
            cx, cy = 50.0, 50.0
            box_a = PixelBox(cx - wa / 2, cy - ha / 2, cx + wa / 2, cy + ha / 2)
            box_b = PixelBox(cx - wb / 2, cy - hb / 2, cx + wb / 2, cy + hb / 2)
            assert center_aligned_iou((wa, ha), (wb, hb)) == pytest.approx(
                iou(box_a, box_b), abs=1e-9
            )


def _random_int_box(rng, extent):
    x0, x1 = sorted(rng.integers(0, extent, size=2).tolist())
    y0, y1 = sorted(rng.integers(0, extent, size=2).tolist())
    return (x0, y0, x1 + 1, y1 + 1)


def _random_float_box(rng, extent):
    x0, x1 = sorted(rng.uniform(0, extent, size=2).tolist())
    y0, y1 = sorted(rng.uniform(0, extent, size=2).tolist())
    return (x0, y0, x1 + 0.25, y1 + 0.25)
