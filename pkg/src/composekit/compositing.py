"""Placing, matting, and blending retrieved segments onto backgrounds."""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy import ndimage

from composekit.geometry import PixelBox

DEFAULT_FEATHER_RADIUS = 3
SCALE_LIMITS = (0.05, 20.0)


@dataclass
class CompositeSpec:
    """Background plus an ordered list of placements (paint order)."""

    background: np.ndarray
    placements: list[tuple[str, PixelBox]] = field(default_factory=list)
    feather_radius: int = DEFAULT_FEATHER_RADIUS


@dataclass
class Matte:
    """Per-pixel alpha aligned to a scaled segment; values in [0, 1]."""

    alpha: np.ndarray

    def __post_init__(self):
        if self.alpha.min() < 0 or self.alpha.max() > 1:
            raise ValueError("matte alpha must lie in [0, 1]")


@dataclass
class PlacedSegment:
    rgb: np.ndarray
    mask: np.ndarray
    offset: tuple[int, int]  # top-left (x, y) in the background frame
    scale: float


def place_segment(segment, target: PixelBox) -> PlacedSegment:
    """Scale a segment so it shares the target box's center and height.

    The scale factor is ``target height / segment height`` applied
    uniformly, so the segment keeps its aspect ratio and its width may
    differ from the target width. Resampling is bilinear on
    alpha-premultiplied channels to avoid halos.
    """
    scale = target.height / segment.box.height
    if not (SCALE_LIMITS[0] <= scale <= SCALE_LIMITS[1]):
        raise ValueError(
            f"degenerate scale factor {scale:.4f} for segment "
            f"{segment.segment_id} (limits {SCALE_LIMITS})")

    src_h, src_w = segment.mask.shape
    out_w = max(1, int(round(src_w * scale)))
    out_h = max(1, int(round(src_h * scale)))

    alpha = segment.mask.astype(np.float32)
    pre = segment.crop.astype(np.float32) * alpha[..., None]
    interp = cv2.INTER_LINEAR
    pre_s = cv2.resize(pre, (out_w, out_h), interpolation=interp)
    alpha_s = cv2.resize(alpha, (out_w, out_h), interpolation=interp)
    rgb = np.zeros_like(pre_s)
    np.divide(pre_s, alpha_s[..., None], out=rgb, where=alpha_s[..., None] > 1e-6)

    cx, cy = target.center
    offset = (int(round(cx - out_w / 2.0)), int(round(cy - out_h / 2.0)))
    return PlacedSegment(
        rgb=np.clip(np.rint(rgb), 0, 255).astype(np.uint8),
        mask=alpha_s >= 0.5,
        offset=offset,
        scale=scale,
    )


def feather_matte(mask: np.ndarray, radius: int) -> Matte:
    """Alpha ramp from the signed distance to the mask boundary.

    Alpha is 1 on the interior eroded by ``radius``, 0 outside the
    dilation by ``radius``, and crosses 0.5 at the boundary. Radius 0
    yields the hard binary matte.
    """
    if radius < 0:
        raise ValueError("feather radius must be >= 0")
    mask = mask.astype(bool)
    if not mask.any():
        raise ValueError("cannot matte an empty mask")
    if radius == 0:
        return Matte(alpha=mask.astype(np.float32))
    signed = (ndimage.distance_transform_edt(mask)
              - ndimage.distance_transform_edt(~mask))
    alpha = np.clip((signed + radius) / (2.0 * radius), 0.0, 1.0)
    return Matte(alpha=alpha.astype(np.float32))


def blend(background: np.ndarray, fg_rgb: np.ndarray, matte: Matte,
          offset: tuple[int, int]) -> np.ndarray:
    """Alpha-composite the foreground over the background at ``offset``.

    Pixels with alpha exactly 0 stay bit-identical to the background;
    foreground regions outside the canvas are clipped.
    """
    out = background.copy()
    bg_h, bg_w = background.shape[:2]
    fg_h, fg_w = fg_rgb.shape[:2]
    ox, oy = offset

    x0, y0 = max(0, ox), max(0, oy)
    x1, y1 = min(bg_w, ox + fg_w), min(bg_h, oy + fg_h)
    if x1 <= x0 or y1 <= y0:
        return out

    fg = fg_rgb[y0 - oy:y1 - oy, x0 - ox:x1 - ox].astype(np.float64)
    a = matte.alpha[y0 - oy:y1 - oy, x0 - ox:x1 - ox].astype(np.float64)[..., None]
    region = out[y0:y1, x0:x1].astype(np.float64)
    blended = region + a * (fg - region)
    out[y0:y1, x0:x1] = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    return out


def compose(spec: CompositeSpec, pool) -> tuple[np.ndarray, list[dict]]:
    """Render every placement in order; returns (image, provenance).

    Provenance rows carry enough to re-render the composite exactly:
    segment id, target box as [x, y, w, h], and the applied scale.
    """
    image = spec.background.copy()
    provenance = []
    for segment_id, box in spec.placements:
        try:
            record = pool.get(segment_id)
        except KeyError:
            raise KeyError(f"composite references unknown segment id {segment_id!r}")
        placed = place_segment(record, box)
        matte = feather_matte(placed.mask, spec.feather_radius)
        image = blend(image, placed.rgb, matte, placed.offset)
        provenance.append({
            "segment_id": segment_id,
            "box": [box.x_min, box.y_min, box.width, box.height],
            "scale": placed.scale,
        })
    return image, provenance


def spec_from_provenance(background: np.ndarray, provenance: list[dict],
                         feather_radius: int = DEFAULT_FEATHER_RADIUS) -> CompositeSpec:
    """Rebuild a renderable spec from a provenance record."""
    placements = [
        (row["segment_id"], PixelBox.from_xywh(*row["box"]))
        for row in provenance
    ]
    return CompositeSpec(background=background, placements=placements,
                         feather_radius=feather_radius)
