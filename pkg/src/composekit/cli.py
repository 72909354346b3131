"""Unified command-line entry point.

``compose`` dispatches to subcommands; the ``compose-*`` scripts are
aliases for their respective subcommands. Machine-readable JSON goes to
stdout, human logs to stderr. Exit codes: 0 success, 1 failure, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger("composekit")


@dataclass(frozen=True)
class RunConfig:
    """Shared defaults; the numeric thresholds are the reference constants."""

    filter_iou: float = 0.3
    edge_distance_px: float = 18.0
    min_area_px2: float = 2500.0
    size_prefilter_iou: float = 0.4
    blur_sigma: float = 3.2
    detector_score_threshold: float = 0.7
    resolution: int = 480
    grid_size: int = 15
    seed: int = 0

    def __post_init__(self):
        for name in ("filter_iou", "edge_distance_px", "min_area_px2",
                     "size_prefilter_iou", "blur_sigma",
                     "detector_score_threshold"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


DEFAULTS = RunConfig()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compose",
        description="Automatic person compositing: data, training, retrieval, "
                    "compositing, evaluation, and serving.")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config file; explicit flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("data", help="dataset construction")
    dsub = p.add_subparsers(dest="subcommand", required=True)
    b = dsub.add_parser("build", help="build training samples from annotations")
    b.add_argument("--annotations", type=Path, required=True)
    b.add_argument("--images", type=Path, required=True)
    b.add_argument("--out", type=Path, required=True)
    b.add_argument("--seed", type=int, default=DEFAULTS.seed)
    b.add_argument("--category", default="person")
    b.add_argument("--resolution", type=int, default=DEFAULTS.resolution)
    b.add_argument("--sigma", type=float, default=DEFAULTS.blur_sigma)
    b.add_argument("--filter-iou", type=float, default=DEFAULTS.filter_iou)
    b.add_argument("--edge-distance", type=float, default=DEFAULTS.edge_distance_px)
    b.add_argument("--min-area", type=float, default=DEFAULTS.min_area_px2)
    b.add_argument("--score-threshold", type=float,
                   default=DEFAULTS.detector_score_threshold)
    b.add_argument("--detections", type=Path, default=None,
                   help="JSONL detection cache (written if absent)")
    b.set_defaults(func=cmd_data_build)

    p = sub.add_parser("net", help="placement network")
    nsub = p.add_subparsers(dest="subcommand", required=True)
    t = nsub.add_parser("train", help="train on a built dataset")
    t.add_argument("--data", type=Path, required=True)
    t.add_argument("--out", type=Path, required=True)
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--optimizer", choices=["sgd", "adam"], default="sgd")
    t.add_argument("--seed", type=int, default=DEFAULTS.seed)
    t.add_argument("--width-divisor", type=int, default=1,
                   help="thin every channel width by this factor")
    t.add_argument("--log", type=Path, default=None, help="metrics JSONL path")
    t.set_defaults(func=cmd_net_train)

    pr = nsub.add_parser("predict", help="predict placements for a background")
    pr.add_argument("--ckpt", type=Path, required=True)
    pr.add_argument("--image", type=Path, required=True)
    pr.add_argument("--layout", type=Path, default=None,
                    help="precomputed layout image; black if omitted")
    pr.add_argument("--k", type=int, default=2, help="top-k locations and sizes")
    pr.add_argument("--heatmap", type=Path, default=None)
    pr.set_defaults(func=cmd_net_predict)

    p = sub.add_parser("pool", help="candidate segment pool")
    psub = p.add_subparsers(dest="subcommand", required=True)
    pb = psub.add_parser("build")
    pb.add_argument("--annotations", type=Path, required=True)
    pb.add_argument("--images", type=Path, required=True)
    pb.add_argument("--out", type=Path, required=True)
    pb.add_argument("--extractor", choices=["histogram", "resnet50"],
                    default="histogram")
    pb.add_argument("--descriptor-dim", type=int, default=64)
    pb.add_argument("--weights", type=Path, default=None,
                    help="backbone weights for the resnet50 extractor")
    pb.set_defaults(func=cmd_pool_build)

    pq = psub.add_parser("query")
    pq.add_argument("--pool", type=Path, required=True)
    pq.add_argument("--image", type=Path, required=True)
    pq.add_argument("--box", required=True, help="x,y,w,h in pixels")
    pq.add_argument("--k", type=int, default=9)
    pq.add_argument("--extractor", choices=["histogram", "resnet50"],
                    default="histogram")
    pq.add_argument("--descriptor-dim", type=int, default=64)
    pq.add_argument("--weights", type=Path, default=None)
    pq.set_defaults(func=cmd_pool_query)

    r = sub.add_parser("run", help="end-to-end: predict, retrieve, composite")
    r.add_argument("--ckpt", type=Path, required=True)
    r.add_argument("--pool", type=Path, required=True)
    r.add_argument("--image", type=Path, required=True)
    r.add_argument("--n", type=int, default=1, help="number of people")
    r.add_argument("--out", type=Path, required=True)
    r.add_argument("--provenance", type=Path, default=None)
    r.add_argument("--heatmap", type=Path, default=None)
    r.add_argument("--feather", type=int, default=3)
    r.add_argument("--extractor", choices=["histogram", "resnet50"],
                   default="histogram")
    r.add_argument("--descriptor-dim", type=int, default=64)
    r.add_argument("--weights", type=Path, default=None)
    r.set_defaults(func=cmd_run)

    rr = sub.add_parser("render", help="re-render a composite from provenance")
    rr.add_argument("--image", type=Path, required=True)
    rr.add_argument("--pool", type=Path, required=True)
    rr.add_argument("--provenance", type=Path, required=True)
    rr.add_argument("--out", type=Path, required=True)
    rr.add_argument("--feather", type=int, default=3)
    rr.set_defaults(func=cmd_render)

    e = sub.add_parser("eval", help="histogram-correlation evaluation")
    e.add_argument("--ckpt", type=Path, required=True)
    e.add_argument("--data", type=Path, required=True, help="built dataset dir")
    e.add_argument("--out-dir", type=Path, default=None,
                   help="where to write histogram PNGs")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("serve", help="run the interactive HTTP service")
    s.add_argument("--ckpt", type=Path, required=True)
    s.add_argument("--pool", type=Path, required=True)
    s.add_argument("--port", type=int, default=8008)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--persist", type=Path, default=None)
    s.add_argument("--extractor", choices=["histogram", "resnet50"],
                   default="histogram")
    s.add_argument("--descriptor-dim", type=int, default=64)
    s.add_argument("--weights", type=Path, default=None)
    s.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    _merge_config_file(parser, args, argv)
    try:
        result = args.func(args)
    except Exception as exc:  # subcommand failure -> exit 1
        log.error("%s", exc)
        return 1
    if result is not None:
        json.dump(result, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def _merge_config_file(parser, args, argv) -> None:
    """Apply config-file values for every flag not given explicitly."""
    if args.config is None:
        return
    with open(args.config) as fh:
        overrides = json.load(fh)
    given = set()
    for token in (argv if argv is not None else sys.argv[1:]):
        if token.startswith("--"):
            given.add(token.lstrip("-").split("=")[0].replace("-", "_"))
    for key, value in overrides.items():
        if hasattr(args, key) and key not in given:
            setattr(args, key, value)


# ----------------------------------------------------------------------
# Subcommand implementations (imports deferred to keep --help fast).
# ----------------------------------------------------------------------

def cmd_data_build(args):
    from composekit.data.build import BuildConfig, build_training_set
    from composekit.data.detect import DetectionCache
    from composekit.data.filters import FilterConfig

    cache = DetectionCache(args.detections) if args.detections else None
    rows = build_training_set(
        args.annotations, args.images, args.out,
        detection_cache=cache,
        config=BuildConfig(
            category=args.category,
            resolution=args.resolution,
            sigma=args.sigma,
            score_threshold=args.score_threshold,
            seed=args.seed,
            filters=FilterConfig(
                max_iou=args.filter_iou,
                min_edge_distance=args.edge_distance,
                min_area=args.min_area,
            ),
        ),
    )
    return {"n_samples": len(rows), "out": str(args.out)}


def cmd_net_train(args):
    from composekit.data.build import ManifestDataset
    from composekit.net.checkpoint import save_checkpoint
    from composekit.net.config import NetworkConfig
    from composekit.net.model import build_network
    from composekit.net.training import TrainSettings, train

    dataset = ManifestDataset(args.data)
    meta = json.loads((Path(args.data) / "meta.json").read_text())
    config = NetworkConfig(input_resolution=meta.get("resolution", 480))
    if args.width_divisor > 1:
        config = config.scaled(args.width_divisor)
    model = build_network(config, seed=args.seed)
    samples = [dataset[i] for i in range(len(dataset))]
    metrics = train(model, samples, TrainSettings(
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        optimizer=args.optimizer, seed=args.seed,
    ), log_path=args.log)
    save_checkpoint(args.out, model, seed=args.seed,
                    extra={"epochs": args.epochs, "n_samples": len(samples),
                           "final_loss": metrics[-1]["loss"]})
    return {"checkpoint": str(args.out), "final": metrics[-1]}


def _load_scene(image_path, layout_path, resolution, sigma):
    import numpy as np

    from composekit import imgio
    from composekit.data.palette import Palette
    from composekit.data.scene import SceneInput, build_scene_input

    background = imgio.load_rgb(image_path)
    scene = build_scene_input(background, [], [], Palette.generate([], 0),
                              resolution=resolution, sigma=sigma)
    if layout_path is not None:
        il = imgio.load_rgb(layout_path)
        if il.shape[:2] != (resolution, resolution):
            il = imgio.resize_rgb(il, resolution, resolution)
        scene = SceneInput(ib=scene.ib, il=il, frame=scene.frame,
                           native_width=scene.native_width,
                           native_height=scene.native_height)
    return background, scene


def _make_extractor(args):
    from composekit.retrieval.features import (
        HistogramFeatureExtractor,
        ResNet50FeatureExtractor,
    )

    if args.extractor == "resnet50":
        return ResNet50FeatureExtractor(str(args.weights) if args.weights else None)
    return HistogramFeatureExtractor(descriptor_dim=args.descriptor_dim)


def cmd_net_predict(args):
    from composekit import imgio
    from composekit.geometry import denormalize_box_clipped
    from composekit.net.checkpoint import load_checkpoint
    from composekit.net.heatmap import export_heatmap
    from composekit.net.inference import predict

    model, header = load_checkpoint(args.ckpt)
    background, scene = _load_scene(args.image, args.layout,
                                    model.config.input_resolution,
                                    DEFAULTS.blur_sigma)
    pred = predict(model, scene, k_loc=args.k, k_size=args.k)
    h, w = background.shape[:2]
    boxes = []
    for nbox, (cell, size_cell) in zip(pred.boxes, pred.box_cells):
        try:
            pixel = denormalize_box_clipped(nbox, scene.frame, w, h)
        except ValueError:
            continue
        boxes.append({"box": list(pixel.as_xywh()),
                      "cell": cell.index, "size_cell": size_cell.index})
    if args.heatmap:
        imgio.save_png(args.heatmap,
                       export_heatmap(pred, (w, h), background=background,
                                      frame=scene.frame))
    return {"boxes": boxes, "heatmap": str(args.heatmap) if args.heatmap else None}


def cmd_pool_build(args):
    from composekit.retrieval.pool import build_pool

    pool = build_pool(args.annotations, args.images, _make_extractor(args))
    pool.save(args.out)
    return {"pool": str(args.out), "n_segments": len(pool)}


def cmd_pool_query(args):
    from composekit import imgio
    from composekit.geometry import PixelBox
    from composekit.retrieval.pool import load_pool

    pool = load_pool(args.pool)
    image = imgio.load_rgb(args.image)
    x, y, w, h = (float(v) for v in args.box.split(","))
    result = pool.query(image, PixelBox.from_xywh(x, y, w, h),
                        _make_extractor(args), k=args.k)
    return {
        "matches": [{"segment_id": r.segment_id, "distance": d}
                    for r, d in result.matches],
        "all_size_filtered": result.all_size_filtered,
    }


def cmd_run(args):
    from composekit import imgio
    from composekit.compositing import CompositeSpec, compose
    from composekit.geometry import denormalize_box_clipped
    from composekit.net.checkpoint import load_checkpoint
    from composekit.net.heatmap import export_heatmap
    from composekit.net.inference import predict_multi
    from composekit.retrieval.pool import load_pool

    model, _ = load_checkpoint(args.ckpt)
    pool = load_pool(args.pool)
    extractor = _make_extractor(args)
    background, scene = _load_scene(args.image, None,
                                    model.config.input_resolution,
                                    DEFAULTS.blur_sigma)
    h, w = background.shape[:2]
    predictions = predict_multi(model, scene, args.n)
    placements = []
    for pred in predictions:
        try:
            box = denormalize_box_clipped(pred.top_box, scene.frame, w, h)
        except ValueError:
            log.warning("skipping a prediction that decodes into the padding")
            continue
        result = pool.query(background, box, extractor, k=1)
        if not result.matches:
            relaxed = pool.nearest(
                pool.query_vector(background, box, extractor), k=1)
            if not relaxed:
                continue
            record = pool.records[relaxed[0][0]]
            log.warning("size prefilter excluded every candidate; "
                        "falling back to nearest segment %s", record.segment_id)
        else:
            record = result.matches[0][0]
        placements.append((record.segment_id, box))

    spec = CompositeSpec(background=background, placements=placements,
                         feather_radius=args.feather)
    composite, provenance = compose(spec, pool)
    imgio.save_png(args.out, composite)
    if args.provenance:
        args.provenance.parent.mkdir(parents=True, exist_ok=True)
        args.provenance.write_text(json.dumps(provenance, indent=2))
    if args.heatmap:
        imgio.save_png(args.heatmap,
                       export_heatmap(predictions[0], (w, h),
                                      background=background, frame=scene.frame))
    return {"out": str(args.out),
            "provenance": str(args.provenance) if args.provenance else None,
            "placements": provenance}


def cmd_render(args):
    from composekit import imgio
    from composekit.compositing import compose, spec_from_provenance
    from composekit.retrieval.pool import load_pool

    background = imgio.load_rgb(args.image)
    provenance = json.loads(Path(args.provenance).read_text())
    pool = load_pool(args.pool)
    spec = spec_from_provenance(background, provenance, args.feather)
    composite, _ = compose(spec, pool)
    imgio.save_png(args.out, composite)
    return {"out": str(args.out), "n_placements": len(provenance)}


def cmd_eval(args):
    from composekit import imgio
    from composekit.data.build import ManifestDataset
    from composekit.evaluation import evaluate_model
    from composekit.net.checkpoint import load_checkpoint

    model, _ = load_checkpoint(args.ckpt)
    dataset = ManifestDataset(args.data)
    samples = [dataset[i] for i in range(len(dataset))]
    report = evaluate_model(model, samples)
    if args.out_dir:
        for name, image in report.histogram_images().items():
            imgio.save_png(Path(args.out_dir) / f"{name}.png", image)
    return report.to_dict()


def cmd_serve(args):
    import uvicorn

    from composekit.net.checkpoint import load_checkpoint
    from composekit.retrieval.pool import load_pool
    from composekit.service.app import create_app

    model, _ = load_checkpoint(args.ckpt)
    pool = load_pool(args.pool)
    app = create_app(model, pool, _make_extractor(args), persist_dir=args.persist)
    uvicorn.run(app, host=args.host, port=args.port)
    return None


# Console-script aliases: `compose-data ...` == `compose data ...`.

def _alias_main(command: str) -> int:
    return main([command] + sys.argv[1:])


def main_data() -> int:
    return _alias_main("data")


def main_net() -> int:
    return _alias_main("net")


def main_pool() -> int:
    return _alias_main("pool")


def main_run() -> int:
    return _alias_main("run")


def main_eval() -> int:
    return _alias_main("eval")


def main_serve() -> int:
    return _alias_main("serve")


if __name__ == "__main__":
    sys.exit(main())
