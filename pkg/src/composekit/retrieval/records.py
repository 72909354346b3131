"""Person-segment records stored in the candidate pool."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from composekit.geometry import PixelBox

NORM_TOL = 1e-6


@dataclass
class SegmentRecord:
    """A person cutout with its hybrid descriptor.

    ``mask`` and ``crop`` cover the integer-rounded box region of the
    source image, so a pool archive is self-contained for compositing.
    Both descriptor halves are L2-normalized.
    """

    segment_id: str
    source_image: str
    box: PixelBox
    source_width: int
    source_height: int
    mask: np.ndarray
    crop: np.ndarray
    global_desc: np.ndarray
    local_desc: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.mask.any():
            raise ValueError(f"segment {self.segment_id}: empty mask")
        if self.mask.shape != self.crop.shape[:2]:
            raise ValueError(f"segment {self.segment_id}: mask/crop shape mismatch")
        for name, desc in (("global", self.global_desc), ("local", self.local_desc)):
            norm = float(np.linalg.norm(desc))
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(
                    f"segment {self.segment_id}: {name} descriptor norm {norm} != 1")

    @property
    def descriptor(self) -> np.ndarray:
        return np.concatenate([self.global_desc, self.local_desc])

    @property
    def normalized_size(self) -> tuple[float, float]:
        """Box size relative to the source image's square frame."""
        s = float(max(self.source_width, self.source_height))
        return (self.box.width / s, self.box.height / s)
