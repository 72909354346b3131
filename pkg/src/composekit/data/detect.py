"""Object-detection abstraction for layout rendering.

Any detector producing (category, box, score) triples works. Detections
are cached to JSON lines keyed by image id so pipeline runs are
reproducible and detector-free after the first pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from composekit.data.coco import AnnotationRecord
from composekit.geometry import PixelBox


@dataclass(frozen=True)
class Detection:
    category: str
    box: PixelBox
    score: float

    def as_tuple(self):
        return (self.category, self.box, self.score)


class DetectionCache:
    """JSONL-backed detection store, one line per image id."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._store: dict[int, list[Detection]] = {}
        if self.path.exists():
            with open(self.path) as fh:
                for line in fh:
                    entry = json.loads(line)
                    self._store[entry["image_id"]] = [
                        Detection(d["category"], PixelBox.from_xywh(*d["bbox"]), d["score"])
                        for d in entry["detections"]
                    ]

    def __contains__(self, image_id: int) -> bool:
        return image_id in self._store

    def get(self, image_id: int) -> list[Detection]:
        return self._store.get(image_id, [])

    def put(self, image_id: int, detections: list[Detection]) -> None:
        self._store[image_id] = list(detections)

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w") as fh:
            for image_id in sorted(self._store):
                fh.write(json.dumps({
                    "image_id": image_id,
                    "detections": [
                        {"category": d.category, "bbox": list(d.box.as_xywh()), "score": d.score}
                        for d in self._store[image_id]
                    ],
                }) + "\n")


class AnnotationDetections:
    """Detector stand-in that replays ground-truth boxes as detections.

    Useful for offline pipelines and fixtures; a real detector (the paper
    used Faster RCNN) can be dropped in behind the same interface, with its
    outputs cached through :class:`DetectionCache`.
    """

    def __init__(self, records: list[AnnotationRecord], exclude_categories=("person",)):
        self._by_id = {r.image_id: r for r in records}
        self._exclude = set(exclude_categories)

    def detect(self, image, image_id: int) -> list[Detection]:
        record = self._by_id.get(image_id)
        if record is None:
            return []
        return [
            Detection(inst.category, inst.box, 1.0)
            for inst in record.instances
            if inst.category not in self._exclude and not inst.crowd
        ]
