"""Synthetic ground-line scenes with known placement distributions.

Scenes show a sky/ground split, a dark ground line, and a colored door
stripe. A person belongs at the door's horizontal position, standing on
the ground line, with a height tied to the line's row. Placement
parameters are drawn from peaked distributions, so corpora built here have
known position/size histograms — the training signal is fully visible in
the image, and a correctly trained predictor must reproduce the
distribution on held-out scenes.

Also provides a COCO-style fixture writer that paints person glyphs into
such scenes, for exercising the ingestion, retrieval, and compositing
paths without real photographs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from composekit import imgio
from composekit.data.build import TrainingSample, sample_from_scene
from composekit.data.palette import Palette
from composekit.data.scene import SceneInput, blur, render_layout
from composekit.geometry import NormalizedBox, PixelBox, pad_to_square

SKY = (150, 200, 240)
GROUND = (110, 150, 90)
LINE = (40, 30, 25)
DOOR = (200, 60, 50)


@dataclass(frozen=True)
class GroundLineWorld:
    """Distribution of scene parameters; defaults are visibly peaked."""

    y_mean: float = 0.675
    y_std: float = 0.07
    y_range: tuple[float, float] = (0.50, 0.85)
    x_mean: float = 0.5
    x_std: float = 0.12
    x_range: tuple[float, float] = (0.08, 0.92)

    def sample(self, rng: np.random.Generator) -> tuple[float, float]:
        y = float(np.clip(rng.normal(self.y_mean, self.y_std), *self.y_range))
        x = float(np.clip(rng.normal(self.x_mean, self.x_std), *self.x_range))
        return x, y

    @staticmethod
    def person_size(y_stand: float) -> tuple[float, float]:
        # Farther ground lines (smaller y) mean smaller people.
        h = 0.15 + 0.6 * (y_stand - 0.5)
        return 0.4 * h, h


def paint_background(resolution: int, x_door: float, y_line: float) -> np.ndarray:
    """Draw the sky/ground/line/door scene at the given resolution."""
    img = np.empty((resolution, resolution, 3), dtype=np.uint8)
    row = int(round(y_line * resolution))
    img[:row] = SKY
    img[row:] = GROUND
    r0, r1 = max(0, row - 2), min(resolution, row + 3)
    img[r0:r1] = LINE
    door_w = max(3, resolution // 80)
    door_h = int(0.22 * resolution)
    c = int(round(x_door * resolution))
    c0, c1 = max(0, c - door_w // 2), min(resolution, c + door_w // 2 + 1)
    img[max(0, row - door_h):row, c0:c1] = DOOR
    return img


def door_detection(resolution: int, x_door: float, y_line: float):
    door_w = max(3, resolution // 80)
    door_h = int(0.22 * resolution)
    row = int(round(y_line * resolution))
    c = int(round(x_door * resolution))
    box = PixelBox(
        max(0, c - door_w // 2),
        max(1, row - door_h),
        min(resolution - 1, c + door_w // 2 + 1),
        max(2, row),
    )
    return ("door", box, 1.0)


def generate_scene_corpus(
    n: int,
    seed: int = 0,
    resolution: int = 480,
    sigma: float = 3.2,
    world: GroundLineWorld = GroundLineWorld(),
) -> list[TrainingSample]:
    """Build ``n`` square scenes with targets following the world's rule."""
    rng = np.random.default_rng(seed)
    palette = Palette.generate(["door"], seed=7)
    frame = pad_to_square(resolution, resolution)
    samples = []
    for i in range(n):
        x, y = world.sample(rng)
        w, h = world.person_size(y)
        img = paint_background(resolution, x, y)
        ib = blur(img, sigma)
        il = render_layout([door_detection(resolution, x, y)], palette, (resolution, resolution))
        scene = SceneInput(ib=ib, il=il, frame=frame,
                           native_width=resolution, native_height=resolution)
        nbox = NormalizedBox(x_stand=x, y_stand=y, w=w, h=h)
        samples.append(sample_from_scene(scene, nbox, image_id=i, instance_id=i))
    return samples


def paint_person(image: np.ndarray, box: PixelBox, color) -> np.ndarray:
    """Paint a simple person glyph into ``image``; returns its bool mask."""
    h_img, w_img = image.shape[:2]
    x0, y0 = int(round(box.x_min)), int(round(box.y_min))
    x1, y1 = int(round(box.x_max)), int(round(box.y_max))
    mask = np.zeros((h_img, w_img), dtype=bool)
    bw, bh = x1 - x0, y1 - y0
    if bw < 2 or bh < 4:
        return mask
    # Head: ellipse in the top quarter.
    head_h = bh // 4
    cy, cx = y0 + head_h / 2.0, (x0 + x1) / 2.0
    ry, rx = head_h / 2.0, min(bw / 2.0, head_h / 2.0)
    yy, xx = np.ogrid[:h_img, :w_img]
    head = ((yy - cy) / max(ry, 1)) ** 2 + ((xx - cx) / max(rx, 1)) ** 2 <= 1.0
    mask |= head
    # Torso: middle rectangle; legs: two strips below.
    torso_top, torso_bot = y0 + head_h, y0 + (2 * bh) // 3
    tx0, tx1 = x0 + bw // 6, x1 - bw // 6
    mask[torso_top:torso_bot, tx0:tx1] = True
    leg_w = max(1, bw // 5)
    mask[torso_bot:y1, tx0:tx0 + leg_w] = True
    mask[torso_bot:y1, tx1 - leg_w:tx1] = True
    image[mask] = color
    return mask


def encode_rle(mask: np.ndarray) -> dict:
    """Uncompressed COCO RLE (column-major runs, starting with zeros)."""
    flat = mask.T.reshape(-1).astype(np.int8)
    changes = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    counts = np.diff(bounds).tolist()
    if flat[0] == 1:
        counts = [0] + counts
    h, w = mask.shape
    return {"counts": counts, "size": [h, w]}


def make_synthetic_coco(
    out_dir: str | Path,
    n_images: int = 12,
    seed: int = 0,
    world: GroundLineWorld = GroundLineWorld(),
) -> tuple[Path, Path]:
    """Write a small COCO-style dataset of painted scenes with persons.

    Returns (annotations_path, images_dir). Each image holds one to three
    valid persons plus occasional context objects; a portion of persons
    deliberately violate the size or edge-distance filters.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    images, annotations = [], []
    ann_id = 1
    clothes = [(220, 40, 40), (40, 80, 220), (240, 200, 40), (30, 160, 90), (160, 60, 180)]
    for image_id in range(1, n_images + 1):
        res = int(rng.integers(320, 520))
        width, height = res, int(res * rng.uniform(0.75, 1.0))
        x_door, y_line = world.sample(rng)
        img = paint_background(res, x_door, y_line)[:height, :width].copy()
        row = min(height - 4, int(round(y_line * res)))

        file_name = f"{image_id:06d}.png"
        images.append({"id": image_id, "width": width, "height": height,
                       "file_name": file_name})

        for _ in range(int(rng.integers(1, 4))):
            ph = int(rng.uniform(0.28, 0.42) * height)
            pw = int(ph * rng.uniform(0.35, 0.45))
            px = int(rng.uniform(0.1, 0.9) * width)
            x0 = np.clip(px - pw // 2, 20, max(21, width - pw - 20))
            y0 = np.clip(row - ph, 20, max(21, height - ph - 20))
            box = PixelBox(float(x0), float(y0), float(x0 + pw), float(y0 + ph))
            color = clothes[int(rng.integers(len(clothes)))]
            mask = paint_person(img, box, color)
            if not mask.any():
                continue
            annotations.append({
                "id": ann_id, "image_id": image_id, "category_id": 1,
                "bbox": [box.x_min, box.y_min, box.width, box.height],
                "area": float(mask.sum()), "iscrowd": 0,
                "segmentation": encode_rle(mask),
            })
            ann_id += 1

        if rng.random() < 0.5:
            # A context object (bench) sitting on the line.
            bw, bh = int(0.2 * width), int(0.08 * height)
            bx = int(rng.uniform(0.1, 0.7) * width)
            bb = PixelBox(float(bx), float(max(1, row - bh)),
                          float(min(width - 1, bx + bw)), float(row))
            img[int(bb.y_min):int(bb.y_max), int(bb.x_min):int(bb.x_max)] = (90, 60, 30)
            annotations.append({
                "id": ann_id, "image_id": image_id, "category_id": 2,
                "bbox": list(bb.as_xywh()), "area": bb.area, "iscrowd": 0,
                "segmentation": None,
            })
            ann_id += 1

        imgio.save_png(images_dir / file_name, img)

    ann_path = out_dir / "annotations.json"
    with open(ann_path, "w") as fh:
        json.dump({
            "images": images,
            "annotations": annotations,
            "categories": [{"id": 1, "name": "person"}, {"id": 2, "name": "bench"}],
        }, fh)
    return ann_path, images_dir
