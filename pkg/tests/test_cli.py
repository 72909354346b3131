import json

import numpy as np
import pytest

from composekit import imgio
from composekit.cli import DEFAULTS, RunConfig, main
from composekit.data.synthetic import make_synthetic_coco


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Dataset + pool + checkpoint shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cliws")
    ann, images = make_synthetic_coco(root, n_images=8, seed=41)

    data_dir = root / "data"
    assert main(["data", "build", "--annotations", str(ann),
                 "--images", str(images), "--out", str(data_dir)]) == 0

    ckpt = root / "model.ckpt"
    assert main(["net", "train", "--data", str(data_dir), "--out", str(ckpt),
                 "--epochs", "1", "--batch-size", "4",
                 "--width-divisor", "16"]) == 0

    pool_path = root / "pool.zip"
    assert main(["pool", "build", "--annotations", str(ann),
                 "--images", str(images), "--out", str(pool_path)]) == 0
    return root, ann, images, data_dir, ckpt, pool_path


class TestRunConfig:
    def test_defaults_are_reference_constants(self):
        assert DEFAULTS.filter_iou == 0.3
        assert DEFAULTS.edge_distance_px == 18.0
        assert DEFAULTS.min_area_px2 == 2500.0
        assert DEFAULTS.size_prefilter_iou == 0.4
        assert DEFAULTS.blur_sigma == 3.2

    def test_non_positive_threshold_rejected(self):
        with pytest.raises(ValueError):
            RunConfig(filter_iou=0.0)


class TestDispatch:
    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        assert "compose" in capsys.readouterr().out

    def test_unknown_flag_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["data", "build", "--bogus"])
        assert exc.value.code == 2

    def test_missing_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_subcommand_failure_exits_one(self, tmp_path):
        code = main(["net", "predict", "--ckpt", str(tmp_path / "missing.ckpt"),
                     "--image", str(tmp_path / "missing.png")])
        assert code == 1


class TestConfigMerge:
    def test_config_value_applies_when_flag_absent(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epochs": 3}))
        # Parse-level check via a dry failure: the merged value shows up in
        # the error-free parse path; easiest observable is a real tiny run.
        ann, images = make_synthetic_coco(tmp_path, n_images=3, seed=5)
        data_dir = tmp_path / "d"
        assert main(["data", "build", "--annotations", str(ann),
                     "--images", str(images), "--out", str(data_dir)]) == 0
        capsys.readouterr()
        ckpt = tmp_path / "m.ckpt"
        assert main(["--config", str(cfg), "net", "train",
                     "--data", str(data_dir), "--out", str(ckpt),
                     "--batch-size", "4", "--width-divisor", "16"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["final"]["epoch"] == 3

    def test_explicit_flag_beats_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epochs": 7}))
        ann, images = make_synthetic_coco(tmp_path, n_images=3, seed=6)
        data_dir = tmp_path / "d"
        assert main(["data", "build", "--annotations", str(ann),
                     "--images", str(images), "--out", str(data_dir)]) == 0
        capsys.readouterr()
        ckpt = tmp_path / "m.ckpt"
        assert main(["--config", str(cfg), "net", "train",
                     "--data", str(data_dir), "--out", str(ckpt),
                     "--epochs", "1", "--batch-size", "4",
                     "--width-divisor", "16"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["final"]["epoch"] == 1


class TestPipelineCommands:
    def test_data_build_outputs(self, workspace, capsys):
        _, _, _, data_dir, _, _ = workspace
        assert (data_dir / "manifest.jsonl").exists()
        assert (data_dir / "meta.json").exists()
        meta = json.loads((data_dir / "meta.json").read_text())
        assert meta["resolution"] == 480
        assert meta["sigma"] == 3.2

    def test_net_predict_json(self, workspace, capsys, tmp_path):
        root, _, images, _, ckpt, _ = workspace
        image = next(images.glob("*.png"))
        heat = tmp_path / "heat.png"
        assert main(["net", "predict", "--ckpt", str(ckpt),
                     "--image", str(image), "--k", "2",
                     "--heatmap", str(heat)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert len(out["boxes"]) >= 1
        assert heat.exists()

    def test_pool_query_json(self, workspace, capsys):
        _, _, images, _, _, pool_path = workspace
        image = next(images.glob("*.png"))
        assert main(["pool", "query", "--pool", str(pool_path),
                     "--image", str(image), "--box", "100,60,60,140",
                     "--k", "3"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert "matches" in out
        if out["matches"]:
            d = [m["distance"] for m in out["matches"]]
            assert d == sorted(d)

    def test_run_then_render_identical(self, workspace, capsys, tmp_path):
        _, _, images, _, ckpt, pool_path = workspace
        image = next(images.glob("*.png"))
        out_png = tmp_path / "composite.png"
        prov = tmp_path / "prov.json"
        assert main(["run", "--ckpt", str(ckpt), "--pool", str(pool_path),
                     "--image", str(image), "--n", "1",
                     "--out", str(out_png), "--provenance", str(prov)]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["placements"]
        rerender = tmp_path / "rerender.png"
        assert main(["render", "--image", str(image), "--pool", str(pool_path),
                     "--provenance", str(prov), "--out", str(rerender)]) == 0
        assert np.array_equal(imgio.load_rgb(out_png), imgio.load_rgb(rerender))

    def test_eval_reports_correlations(self, workspace, capsys, tmp_path):
        _, _, _, data_dir, ckpt, _ = workspace
        out_dir = tmp_path / "hists"
        assert main(["eval", "--ckpt", str(ckpt), "--data", str(data_dir),
                     "--out-dir", str(out_dir)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert "position_correlation" in out and "size_correlation" in out
        assert out["n_samples"] >= 1
        assert (out_dir / "truth_position.png").exists()
