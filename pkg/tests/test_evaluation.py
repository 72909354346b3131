import numpy as np
import pytest

import composekit.compositing as compositing
from composekit.compositing import CompositeSpec
from composekit.evaluation import (
    Histogram2D,
    UndefinedCorrelationError,
    accumulate,
    correlation,
    evaluate_model,
    render_histogram,
    render_silhouette,
)
from composekit.geometry import NormalizedBox, PixelBox
from oracles import pearson
from seg_fixtures import FakePool, make_segment


class TestAccumulate:
    def test_empty_list_all_zero(self):
        pos, size = accumulate([])
        assert pos.total == 0 and size.total == 0

    def test_single_box_single_bin(self):
        pos, size = accumulate([NormalizedBox(0.5, 0.9, 0.2, 0.4)])
        assert pos.total == 1 and size.total == 1
        assert pos.counts[13, 7] == 1    # encode(0.5, 0.9)
        assert size.counts[6, 3] == 1    # encode(0.2, 0.4)

    def test_additivity(self):
        box = NormalizedBox(0.3, 0.8, 0.1, 0.3)
        pos, _ = accumulate([box] * 100)
        assert pos.counts.max() == 100 and pos.total == 100

    def test_permutation_invariance_and_merge(self):
        rng = np.random.default_rng(0)
        boxes = [NormalizedBox(*rng.uniform(0.05, 0.95, size=4)) for _ in range(50)]
        a, _ = accumulate(boxes)
        b, _ = accumulate(boxes[::-1])
        assert np.array_equal(a.counts, b.counts)
        left, _ = accumulate(boxes[:25])
        right, _ = accumulate(boxes[25:])
        assert np.array_equal(left.merge(right).counts, a.counts)


class TestCorrelation:
    def test_self_correlation_is_one(self):
        rng = np.random.default_rng(1)
        h = Histogram2D(counts=rng.integers(0, 50, (15, 15)).astype(np.int64))
        assert correlation(h, h) == pytest.approx(1.0)

    def test_positive_scale_invariance(self):
        rng = np.random.default_rng(2)
        counts = rng.integers(0, 50, (15, 15)).astype(np.int64)
        a = Histogram2D(counts=counts)
        b = Histogram2D(counts=counts * 7)
        assert correlation(a, b) == pytest.approx(1.0)

    def test_one_hot_pair_closed_form(self):
        a = np.zeros((15, 15), dtype=np.int64)
        b = np.zeros((15, 15), dtype=np.int64)
        a.flat[0] = 1
        b.flat[1] = 1
        got = correlation(Histogram2D(counts=a), Histogram2D(counts=b))
        # Two distinct one-hot vectors over n bins correlate at -1/(n-1).
        assert got == pytest.approx(-1.0 / 224)
        assert got == pytest.approx(pearson(a, b))

    def test_matches_scipy_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = rng.integers(0, 100, (15, 15)).astype(np.int64)
            b = rng.integers(0, 100, (15, 15)).astype(np.int64)
            got = correlation(Histogram2D(counts=a), Histogram2D(counts=b))
            assert got == pytest.approx(pearson(a, b), abs=1e-9)

    def test_symmetric_and_affine_invariant(self):
        rng = np.random.default_rng(4)
        a = Histogram2D(counts=rng.integers(0, 30, (15, 15)).astype(np.int64))
        b = Histogram2D(counts=rng.integers(0, 30, (15, 15)).astype(np.int64))
        assert correlation(a, b) == pytest.approx(correlation(b, a))
        shifted = Histogram2D(counts=b.counts * 3 + 11)
        assert correlation(a, shifted) == pytest.approx(correlation(a, b))

    def test_constant_histogram_rejected(self):
        flat = Histogram2D(counts=np.full((15, 15), 4, dtype=np.int64))
        rng = np.random.default_rng(5)
        other = Histogram2D(counts=rng.integers(0, 9, (15, 15)).astype(np.int64))
        with pytest.raises(UndefinedCorrelationError):
            correlation(flat, other)


class TestEvaluateModel:
    def test_oracle_predictor_scores_one(self):
        # A fake model whose top box equals the ground truth per scene gives
        # correlation 1 on both axes. Build it by monkeypatching predict.
        from composekit.data.synthetic import generate_scene_corpus
        import composekit.evaluation as ev

        samples = generate_scene_corpus(30, seed=6, resolution=96)
        idx = {i: s.nbox for i, s in enumerate(samples)}
        calls = {"i": 0}

        class FakePrediction:
            def __init__(self, nbox):
                self.top_box = nbox

        real_predict = ev.predict

        def oracle_predict(model, scene, **kw):
            nbox = idx[calls["i"]]
            calls["i"] += 1
            return FakePrediction(nbox)

        ev.predict = oracle_predict
        try:
            report = ev.evaluate_model(object(), samples)
        finally:
            ev.predict = real_predict
        assert report.position_correlation == pytest.approx(1.0)
        assert report.size_correlation == pytest.approx(1.0)
        assert report.n_samples == 30

    def test_uniform_random_predictor_near_zero(self):
        # Peaked ground truth vs uniform-random cells: |d| < 0.2 at 10k samples.
        rng = np.random.default_rng(7)
        truth = Histogram2D(axis="position")
        uniform = Histogram2D(axis="position")
        for _ in range(10000):
            x = float(np.clip(rng.normal(0.5, 0.1), 0, 1))
            y = float(np.clip(rng.normal(0.7, 0.08), 0, 1))
            truth.add(NormalizedBox(x, y, 0.2, 0.3))
            ux, uy = rng.uniform(0, 1, size=2)
            uniform.add(NormalizedBox(float(ux), float(uy), 0.2, 0.3))
        assert abs(correlation(truth, uniform)) < 0.2

    def test_empty_eval_set_rejected(self):
        with pytest.raises(ValueError):
            evaluate_model(object(), [])


class TestRenderHistogram:
    def test_upscale_geometry(self):
        h = Histogram2D(counts=np.eye(15, dtype=np.int64))
        img = render_histogram(h, cell_px=8)
        assert img.shape == (120, 120, 3)

    def test_zero_histogram_renders(self):
        img = render_histogram(Histogram2D())
        assert img.shape == (240, 240, 3)


class TestSilhouette:
    def test_white_exactly_where_alpha_above_half(self):
        bg = np.random.default_rng(8).integers(0, 200, (200, 200, 3), dtype=np.uint8)
        seg = make_segment()
        box = PixelBox(80, 60, 120, 160)
        spec = CompositeSpec(background=bg, placements=[(seg.segment_id, box)])
        sil = render_silhouette(spec, FakePool([seg]))

        placed = compositing.place_segment(seg, box)
        matte = compositing.feather_matte(placed.mask, spec.feather_radius)
        region = np.zeros((200, 200), dtype=bool)
        ox, oy = placed.offset
        h, w = placed.mask.shape
        region[oy:oy + h, ox:ox + w] = matte.alpha > 0.5
        assert (sil[region] == 255).all()
        assert np.array_equal(sil[~region], bg[~region])

    def test_empty_spec_unchanged(self):
        bg = np.full((20, 20, 3), 9, dtype=np.uint8)
        sil = render_silhouette(CompositeSpec(background=bg), FakePool([]))
        assert np.array_equal(sil, bg)

    def test_same_alpha_as_textured_composite(self, monkeypatch):
        seen = []
        real = compositing.feather_matte

        def spy(mask, radius):
            matte = real(mask, radius)
            seen.append(matte.alpha.copy())
            return matte

        monkeypatch.setattr(compositing, "feather_matte", spy)
        import composekit.evaluation as ev
        monkeypatch.setattr(ev, "feather_matte", spy)

        bg = np.zeros((200, 200, 3), dtype=np.uint8)
        seg = make_segment()
        box = PixelBox(80, 60, 120, 160)
        spec = CompositeSpec(background=bg, placements=[(seg.segment_id, box)])
        compositing.compose(spec, FakePool([seg]))
        render_silhouette(spec, FakePool([seg]))
        assert len(seen) == 2
        assert np.array_equal(seen[0], seen[1])
