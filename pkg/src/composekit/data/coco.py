"""COCO-format annotation ingestion and mask decoding.

Supports polygon segmentations, uncompressed RLE, and the compressed
RLE string variant. Masks decode to bool arrays in (H, W) layout.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from composekit.geometry import PixelBox

log = logging.getLogger(__name__)


@dataclass
class InstanceAnnotation:
    instance_id: int
    category: str
    box: PixelBox
    crowd: bool
    segmentation: object = None  # raw COCO segmentation (polygons or RLE dict)

    def decode_mask(self, height: int, width: int) -> np.ndarray:
        """Rasterize this instance's segmentation to a bool (H, W) mask."""
        return decode_segmentation(self.segmentation, height, width)


@dataclass
class AnnotationRecord:
    image_id: int
    width: int
    height: int
    file_name: str
    instances: list[InstanceAnnotation] = field(default_factory=list)


def load_coco_annotations(path: str | Path) -> list[AnnotationRecord]:
    """Parse a COCO instance-annotation JSON into per-image records.

    Instances whose boxes are degenerate (zero width or height) are dropped
    at ingestion with a warning; records are sorted by image id.
    """
    with open(path) as fh:
        raw = json.load(fh)

    categories = {c["id"]: c["name"] for c in raw.get("categories", [])}
    records: dict[int, AnnotationRecord] = {}
    for img in raw["images"]:
        records[img["id"]] = AnnotationRecord(
            image_id=img["id"],
            width=img["width"],
            height=img["height"],
            file_name=img.get("file_name", ""),
        )

    for ann in raw.get("annotations", []):
        record = records.get(ann["image_id"])
        if record is None:
            log.warning("annotation %s references unknown image %s; skipped",
                        ann.get("id"), ann.get("image_id"))
            continue
        x, y, w, h = ann["bbox"]
        if w <= 0 or h <= 0:
            log.warning("degenerate box on annotation %s; skipped", ann.get("id"))
            continue
        record.instances.append(InstanceAnnotation(
            instance_id=ann["id"],
            category=categories.get(ann["category_id"], str(ann["category_id"])),
            box=PixelBox.from_xywh(x, y, w, h),
            crowd=bool(ann.get("iscrowd", 0)),
            segmentation=ann.get("segmentation"),
        ))

    out = sorted(records.values(), key=lambda r: r.image_id)
    for record in out:
        record.instances.sort(key=lambda i: i.instance_id)
    return out


def decode_segmentation(segmentation, height: int, width: int) -> np.ndarray:
    """Decode a COCO segmentation (polygons or RLE) to a bool mask."""
    if segmentation is None:
        return np.zeros((height, width), dtype=bool)
    if isinstance(segmentation, dict):
        counts = segmentation["counts"]
        h, w = segmentation["size"]
        if isinstance(counts, str):
            counts = _decode_rle_string(counts)
        return _rle_to_mask(counts, h, w)
    # list of polygons, each a flat [x0, y0, x1, y1, ...] sequence
    img = Image.new("1", (width, height), 0)
    draw = ImageDraw.Draw(img)
    for poly in segmentation:
        pts = [(poly[i], poly[i + 1]) for i in range(0, len(poly) - 1, 2)]
        if len(pts) >= 3:
            draw.polygon(pts, outline=1, fill=1)
    return np.asarray(img, dtype=bool)


def mask_consistent_with_box(mask: np.ndarray, box: PixelBox, slack: float = 2.0) -> bool:
    """True when the mask's tight bounds lie within the box dilated by ``slack``."""
    ys, xs = np.nonzero(mask)
    if len(ys) == 0:
        return False
    return (
        xs.min() >= box.x_min - slack
        and ys.min() >= box.y_min - slack
        and xs.max() + 1 <= box.x_max + slack
        and ys.max() + 1 <= box.y_max + slack
    )


def _rle_to_mask(counts, height: int, width: int) -> np.ndarray:
    # COCO RLE runs are column-major and start with a run of zeros.
    flat = np.zeros(height * width, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        flat[pos:pos + run] = value
        pos += run
        value = not value
    return flat.reshape((width, height)).T


def _decode_rle_string(s: str) -> list[int]:
    # COCO's LEB128-like variable-length integer coding with delta encoding
    # for every count after the second.
    counts: list[int] = []
    i = 0
    while i < len(s):
        x = 0
        k = 0
        more = True
        while more:
            c = ord(s[i]) - 48
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            i += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return counts
