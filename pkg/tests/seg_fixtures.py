"""Shared segment/pool fixtures for compositing-related tests."""

import numpy as np

from composekit.geometry import PixelBox
from composekit.retrieval.records import SegmentRecord


def unit(v):
    return (v / np.linalg.norm(v)).astype(np.float32)


def make_segment(seg_id="seg_00001", w=40, h=100, color=(200, 50, 50)):
    rng = np.random.default_rng(0)
    mask = np.zeros((h, w), dtype=bool)
    mask[2:h - 2, 4:w - 4] = True
    crop = np.zeros((h, w, 3), dtype=np.uint8)
    crop[mask] = color
    return SegmentRecord(
        segment_id=seg_id, source_image="x.png",
        box=PixelBox(10, 10, 10 + w, 10 + h),
        source_width=200, source_height=200,
        mask=mask, crop=crop,
        global_desc=unit(rng.normal(size=8)),
        local_desc=unit(rng.normal(size=8)),
    )


class FakePool:
    def __init__(self, records):
        self._by_id = {r.segment_id: r for r in records}

    def get(self, seg_id):
        return self._by_id[seg_id]
