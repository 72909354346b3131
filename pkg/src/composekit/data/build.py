"""Training-set construction: filtering, scene building, manifest output."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from composekit import imgio
from composekit.data.coco import AnnotationRecord, load_coco_annotations, mask_consistent_with_box
from composekit.data.detect import AnnotationDetections, DetectionCache
from composekit.data.filters import FilterConfig, filter_instances
from composekit.data.palette import Palette
from composekit.data.scene import (
    DEFAULT_BLUR_SIGMA,
    DEFAULT_DILATION_RADIUS,
    DEFAULT_RESOLUTION,
    DEFAULT_SCORE_THRESHOLD,
    SceneInput,
    build_scene_input,
)
from composekit.geometry import NormalizedBox, encode_cell, normalize_box

log = logging.getLogger(__name__)


@dataclass
class TrainingSample:
    """One supervised sample: scene inputs plus grid-cell targets."""

    ib: np.ndarray
    il: np.ndarray
    g_xy: int
    g_wh: int
    image_id: int
    instance_id: int
    nbox: NormalizedBox


@dataclass
class BuildConfig:
    category: str = "person"
    resolution: int = DEFAULT_RESOLUTION
    sigma: float = DEFAULT_BLUR_SIGMA
    dilation_radius: int = DEFAULT_DILATION_RADIUS
    score_threshold: float = DEFAULT_SCORE_THRESHOLD
    seed: int = 0
    filters: FilterConfig = field(default_factory=FilterConfig)


def sample_from_scene(
    scene: SceneInput, nbox: NormalizedBox, image_id: int, instance_id: int
) -> TrainingSample:
    """Derive the grid targets for one instance of a built scene."""
    return TrainingSample(
        ib=scene.ib,
        il=scene.il,
        g_xy=encode_cell(nbox.x_stand, nbox.y_stand).index,
        g_wh=encode_cell(nbox.w, nbox.h).index,
        image_id=image_id,
        instance_id=instance_id,
        nbox=nbox,
    )


def build_training_set(
    annotations_path: str | Path,
    images_dir: str | Path,
    out_dir: str | Path,
    detector=None,
    detection_cache: DetectionCache | None = None,
    config: BuildConfig = BuildConfig(),
) -> list[dict]:
    """Build SceneInputs and emit one manifest row per surviving instance.

    Every person instance in an image is erased in a single pass, so all
    samples from one image share the same (I_B, I_L) pair and differ only
    in their target box. Unreadable annotations and missing image files
    are skipped with a warning.

    Returns the manifest rows, which are also written to
    ``out_dir/manifest.jsonl`` along with the PNG inputs and ``meta.json``.
    """
    out_dir = Path(out_dir)
    images_dir = Path(images_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    records = load_coco_annotations(annotations_path)
    palette = Palette.generate(
        sorted({i.category for r in records for i in r.instances}), seed=config.seed
    )
    if detector is None and detection_cache is None:
        detector = AnnotationDetections(records)

    rows: list[dict] = []
    for record in records:
        survivors = filter_instances(record, config.category, config.filters)
        if not survivors:
            continue
        image_path = images_dir / record.file_name
        try:
            image = imgio.load_rgb(image_path)
        except FileNotFoundError:
            log.warning("image file missing for id %s: %s", record.image_id, image_path)
            continue
        if image.shape[:2] != (record.height, record.width):
            log.warning("image %s dimensions %s disagree with annotation (%s, %s); skipped",
                        record.image_id, image.shape[:2], record.height, record.width)
            continue

        try:
            scene = _build_scene_for_record(
                image, record, detector, detection_cache, palette, config
            )
        except ValueError as exc:
            log.warning("scene build failed for image %s: %s", record.image_id, exc)
            continue

        ib_path = out_dir / f"{record.image_id:012d}_ib.png"
        il_path = out_dir / f"{record.image_id:012d}_il.png"
        imgio.save_png(ib_path, scene.ib)
        imgio.save_png(il_path, scene.il)

        for _, inst in survivors:
            nbox = normalize_box(inst.box, scene.frame)
            sample = sample_from_scene(scene, nbox, record.image_id, inst.instance_id)
            rows.append({
                "image_id": record.image_id,
                "instance_id": inst.instance_id,
                "g_xy": sample.g_xy,
                "g_wh": sample.g_wh,
                "nbox": [nbox.x_stand, nbox.y_stand, nbox.w, nbox.h],
                "ib": ib_path.name,
                "il": il_path.name,
            })

    with open(out_dir / "manifest.jsonl", "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    with open(out_dir / "meta.json", "w") as fh:
        json.dump({
            "n_samples": len(rows),
            "resolution": config.resolution,
            "sigma": config.sigma,
            "category": config.category,
            "seed": config.seed,
            "score_threshold": config.score_threshold,
            "palette": palette.to_dict(),
            "filters": {
                "max_iou": config.filters.max_iou,
                "min_edge_distance": config.filters.min_edge_distance,
                "min_area": config.filters.min_area,
                "iou_against_all": config.filters.iou_against_all,
            },
        }, fh, indent=2)
    if detection_cache is not None:
        detection_cache.save()
    log.info("built %d training samples into %s", len(rows), out_dir)
    return rows


def _build_scene_for_record(image, record, detector, cache, palette, config) -> SceneInput:
    masks = []
    for inst in record.instances:
        if inst.category != config.category or inst.segmentation is None:
            continue
        mask = inst.decode_mask(record.height, record.width)
        if mask.any():
            if not mask_consistent_with_box(mask, inst.box):
                log.warning("mask of instance %s spills outside its box", inst.instance_id)
            masks.append(mask)

    if cache is not None and record.image_id in cache:
        detections = cache.get(record.image_id)
    elif detector is not None:
        detections = detector.detect(image, record.image_id)
        if cache is not None:
            cache.put(record.image_id, detections)
    else:
        detections = []

    return build_scene_input(
        image,
        masks,
        [d.as_tuple() for d in detections],
        palette,
        resolution=config.resolution,
        sigma=config.sigma,
        dilation_radius=config.dilation_radius,
        score_threshold=config.score_threshold,
    )


class ManifestDataset:
    """Lazy reader over a built training set; yields TrainingSamples."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        with open(self.directory / "manifest.jsonl") as fh:
            self.rows = [json.loads(line) for line in fh]

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, idx: int) -> TrainingSample:
        row = self.rows[idx]
        return TrainingSample(
            ib=imgio.load_rgb(self.directory / row["ib"]),
            il=imgio.load_rgb(self.directory / row["il"]),
            g_xy=row["g_xy"],
            g_wh=row["g_wh"],
            image_id=row["image_id"],
            instance_id=row["instance_id"],
            nbox=NormalizedBox(*row["nbox"]),
        )
