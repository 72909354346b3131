import numpy as np
import pytest
from scipy import ndimage

from composekit.compositing import (
    CompositeSpec,
    Matte,
    blend,
    compose,
    feather_matte,
    place_segment,
    spec_from_provenance,
)
from composekit.geometry import PixelBox


from seg_fixtures import FakePool, make_segment


class TestPlaceSegment:
    def test_scale_is_height_ratio(self):
        placed = place_segment(make_segment(h=100), PixelBox(50, 50, 90, 100))
        assert placed.scale == pytest.approx(0.5)

    def test_aspect_preserved_ignores_target_width(self):
        # 40x100 segment to target height 50 -> 20x50, whatever the width.
        seg = make_segment(w=40, h=100)
        placed = place_segment(seg, PixelBox(0, 0, 300, 50))
        assert placed.rgb.shape == (50, 20, 3)
        assert placed.mask.shape == (50, 20)

    def test_centered_on_target(self):
        seg = make_segment(w=40, h=100)
        placed = place_segment(seg, PixelBox(180, 250, 220, 350))  # center (200,300)
        h, w = placed.mask.shape
        assert placed.offset == (200 - w // 2, 300 - h // 2)

    def test_degenerate_scale_rejected(self):
        seg = make_segment(h=100)
        with pytest.raises(ValueError):
            place_segment(seg, PixelBox(0, 0, 10, 2))  # scale 0.02
        with pytest.raises(ValueError):
            place_segment(seg, PixelBox(0, 0, 10, 2500))  # scale 25


class TestFeatherMatte:
    def test_radius_zero_equals_mask(self):
        mask = np.zeros((20, 20), dtype=bool)
        mask[5:15, 5:15] = True
        matte = feather_matte(mask, 0)
        assert np.array_equal(matte.alpha, mask.astype(np.float32))

    def test_disk_half_level_tracks_boundary(self):
        # Rasterized disk of radius 20; the 0.5 isocontour must sit within
        # 1 px of the true circle (checked against the distance transform).
        yy, xx = np.mgrid[0:64, 0:64]
        disk = (yy - 32) ** 2 + (xx - 32) ** 2 <= 20 ** 2
        matte = feather_matte(disk, 4)
        signed = (ndimage.distance_transform_edt(disk)
                  - ndimage.distance_transform_edt(~disk))
        # One px of signed distance steps alpha by 1/(2r) = 0.125, so the
        # pixels straddling the 0.5 level sit at 0.375/0.625.
        crossing = np.abs(matte.alpha - 0.5) <= 0.125 + 1e-9
        assert crossing.any()
        assert np.abs(signed[crossing]).max() <= 1.0

    def test_alpha_range_and_plateau(self):
        yy, xx = np.mgrid[0:64, 0:64]
        disk = (yy - 32) ** 2 + (xx - 32) ** 2 <= 20 ** 2
        matte = feather_matte(disk, 4)
        assert matte.alpha.min() >= 0.0 and matte.alpha.max() <= 1.0
        eroded = ndimage.binary_erosion(disk, iterations=5)
        dilated = ndimage.binary_dilation(disk, iterations=5)
        assert (matte.alpha[eroded] == 1.0).all()
        assert (matte.alpha[~dilated] == 0.0).all()

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            feather_matte(np.zeros((8, 8), dtype=bool), 2)


class TestBlend:
    def test_zero_alpha_identity(self):
        rng = np.random.default_rng(1)
        bg = rng.integers(0, 256, (30, 30, 3), dtype=np.uint8)
        fg = rng.integers(0, 256, (10, 10, 3), dtype=np.uint8)
        out = blend(bg, fg, Matte(alpha=np.zeros((10, 10), dtype=np.float32)), (5, 5))
        assert np.array_equal(out, bg)

    def test_full_alpha_copies_foreground(self):
        bg = np.zeros((30, 30, 3), dtype=np.uint8)
        fg = np.full((10, 10, 3), 201, dtype=np.uint8)
        out = blend(bg, fg, Matte(alpha=np.ones((10, 10), dtype=np.float32)), (5, 5))
        assert (out[5:15, 5:15] == 201).all()
        assert (out[:5] == 0).all()

    def test_half_alpha_midpoint(self):
        bg = np.full((8, 8, 3), 200, dtype=np.uint8)
        fg = np.full((8, 8, 3), 100, dtype=np.uint8)
        out = blend(bg, fg, Matte(alpha=np.full((8, 8), 0.5, dtype=np.float32)), (0, 0))
        assert (out == 150).all()

    def test_out_of_bounds_clipped(self):
        bg = np.zeros((20, 20, 3), dtype=np.uint8)
        fg = np.full((10, 10, 3), 255, dtype=np.uint8)
        out = blend(bg, fg, Matte(alpha=np.ones((10, 10), dtype=np.float32)), (15, 15))
        assert (out[15:, 15:] == 255).all()
        assert (out[:15, :15] == 0).all()

    def test_alpha_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            Matte(alpha=np.full((4, 4), 1.5, dtype=np.float32))


class TestCompose:
    def test_empty_spec_returns_background(self):
        bg = np.random.default_rng(2).integers(0, 256, (40, 40, 3), dtype=np.uint8)
        image, provenance = compose(CompositeSpec(background=bg), FakePool([]))
        assert np.array_equal(image, bg)
        assert provenance == []

    def test_single_placement_matches_manual_pipeline(self):
        bg = np.full((200, 200, 3), 30, dtype=np.uint8)
        seg = make_segment()
        spec = CompositeSpec(background=bg,
                             placements=[(seg.segment_id, PixelBox(80, 60, 120, 160))])
        image, provenance = compose(spec, FakePool([seg]))
        placed = place_segment(seg, PixelBox(80, 60, 120, 160))
        matte = feather_matte(placed.mask, spec.feather_radius)
        manual = blend(bg, placed.rgb, matte, placed.offset)
        assert np.array_equal(image, manual)
        assert provenance == [{
            "segment_id": seg.segment_id,
            "box": [80.0, 60.0, 40.0, 100.0],
            "scale": 1.0,
        }]

    def test_paint_order_later_over_earlier(self):
        bg = np.zeros((200, 200, 3), dtype=np.uint8)
        red = make_segment("seg_red", color=(255, 0, 0))
        blue = make_segment("seg_blue", color=(0, 0, 255))
        pool = FakePool([red, blue])
        box = PixelBox(80, 60, 120, 160)
        spec = CompositeSpec(background=bg,
                             placements=[("seg_red", box), ("seg_blue", box)])
        image, _ = compose(spec, pool)
        cx, cy = 100, 110
        assert tuple(image[cy, cx]) == (0, 0, 255)

    def test_unknown_id_raises_with_name(self):
        spec = CompositeSpec(background=np.zeros((10, 10, 3), dtype=np.uint8),
                             placements=[("seg_ghost", PixelBox(0, 0, 5, 9))])
        with pytest.raises(KeyError, match="seg_ghost"):
            compose(spec, FakePool([]))

    def test_far_background_bit_identical(self):
        rng = np.random.default_rng(3)
        bg = rng.integers(0, 256, (200, 200, 3), dtype=np.uint8)
        seg = make_segment()
        box = PixelBox(80, 60, 120, 160)
        spec = CompositeSpec(background=bg, placements=[(seg.segment_id, box)])
        image, _ = compose(spec, FakePool([seg]))
        placed = place_segment(seg, box)
        dilated = np.zeros((200, 200), dtype=bool)
        ox, oy = placed.offset
        h, w = placed.mask.shape
        dilated[oy:oy + h, ox:ox + w] = ndimage.binary_dilation(
            placed.mask, iterations=spec.feather_radius + 1)
        assert np.array_equal(image[~dilated], bg[~dilated])

    def test_provenance_round_trip(self):
        bg = np.full((200, 200, 3), 64, dtype=np.uint8)
        seg = make_segment()
        pool = FakePool([seg])
        spec = CompositeSpec(background=bg,
                             placements=[(seg.segment_id, PixelBox(80, 60, 120, 160))])
        image, provenance = compose(spec, pool)
        rebuilt = spec_from_provenance(bg, provenance, spec.feather_radius)
        image2, _ = compose(rebuilt, pool)
        assert np.array_equal(image, image2)
