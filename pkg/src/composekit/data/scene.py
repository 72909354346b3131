"""Construction of network inputs: erased+blurred backgrounds and layout images."""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

from composekit import imgio
from composekit.geometry import IMAGENET_MEAN_RGB, PixelBox, SquareFrame, pad_to_square

DEFAULT_BLUR_SIGMA = 3.2
DEFAULT_DILATION_RADIUS = 7
DEFAULT_SCORE_THRESHOLD = 0.7
DEFAULT_RESOLUTION = 480


@dataclass
class SceneInput:
    """Paired network inputs at the model resolution.

    ``ib`` is the person-erased, Gaussian-blurred background; ``il`` is the
    rendered detector layout. Both are uint8 RGB of identical shape, already
    square-padded and resized.
    """

    ib: np.ndarray
    il: np.ndarray
    frame: SquareFrame
    native_width: int
    native_height: int

    def __post_init__(self):
        if self.ib.shape != self.il.shape:
            raise ValueError(f"I_B and I_L differ in shape: {self.ib.shape} vs {self.il.shape}")


def blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, kernel truncated at 4 sigma, reflect edges.

    uint8 input comes back rounded to uint8; float input stays float.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive: {sigma}")
    arr = np.asarray(image)
    as_float = arr.astype(np.float64)
    sigmas = (sigma, sigma) if arr.ndim == 2 else (sigma, sigma, 0)
    out = ndimage.gaussian_filter(as_float, sigma=sigmas, mode="reflect", truncate=4.0)
    if arr.dtype == np.uint8:
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out


def erase_person(
    image: np.ndarray,
    mask: np.ndarray,
    dilation_radius: int = DEFAULT_DILATION_RADIUS,
    inpaint_radius: int = 3,
    method: str = "ns",
) -> np.ndarray:
    """Remove masked content by diffusion inpainting.

    The mask is dilated first so halo pixels around the annotation go too.
    The result carries no information from the pixels under the mask.
    ``method`` selects the inpainter: "ns" (Navier-Stokes diffusion,
    default; reproduces constant fields exactly) or "telea" (fast
    marching).
    """
    if mask.shape != image.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match image {image.shape[:2]}")
    mask = mask.astype(bool)
    if not mask.any():
        return image.copy()
    if mask.mean() > 0.9:
        raise ValueError("mask covers more than 90% of the image; nothing to inpaint from")
    if dilation_radius > 0:
        mask = ndimage.binary_dilation(mask, structure=_disk(dilation_radius))
        if mask.mean() > 0.9:
            raise ValueError("dilated mask covers more than 90% of the image")
    flags = {"ns": cv2.INPAINT_NS, "telea": cv2.INPAINT_TELEA}
    if method not in flags:
        raise ValueError(f"unknown inpainting method: {method!r}")
    # Fill propagates inward from the boundary; masked values are never read.
    return cv2.inpaint(image, mask.astype(np.uint8) * 255, inpaint_radius, flags[method])


def render_layout(
    detections,
    palette,
    size: tuple[int, int],
    score_threshold: float = DEFAULT_SCORE_THRESHOLD,
) -> np.ndarray:
    """Render detector boxes as filled color rectangles on black.

    ``detections`` is an iterable of (category, PixelBox, score). Where
    boxes overlap the pixel takes the mean of all covering colors, rounded
    half up. Detections scoring below the threshold are dropped; boxes are
    clipped to the canvas.
    """
    width, height = size
    total = np.zeros((height, width, 3), dtype=np.float64)
    count = np.zeros((height, width), dtype=np.int32)
    for category, box, score in detections:
        if score < score_threshold:
            continue
        x0 = max(0, int(round(box.x_min)))
        y0 = max(0, int(round(box.y_min)))
        x1 = min(width, int(round(box.x_max)))
        y1 = min(height, int(round(box.y_max)))
        if x1 <= x0 or y1 <= y0:
            continue
        total[y0:y1, x0:x1] += palette.color_for(category)
        count[y0:y1, x0:x1] += 1
    out = np.zeros((height, width, 3), dtype=np.uint8)
    covered = count > 0
    mean = total[covered] / count[covered, None]
    out[covered] = np.floor(mean + 0.5).astype(np.uint8)
    return out


def pad_image_to_square(
    image: np.ndarray,
    frame: SquareFrame | None = None,
    fill: tuple[int, int, int] = IMAGENET_MEAN_RGB,
) -> tuple[np.ndarray, SquareFrame]:
    """Embed an image into its minimal square canvas with a fill color."""
    h, w = image.shape[:2]
    if frame is None:
        frame = pad_to_square(w, h)
    canvas = np.empty((frame.s, frame.s, 3), dtype=np.uint8)
    canvas[:] = np.asarray(fill, dtype=np.uint8)
    canvas[frame.offset_y:frame.offset_y + h, frame.offset_x:frame.offset_x + w] = image
    return canvas, frame


def build_scene_input(
    image: np.ndarray,
    person_masks: list[np.ndarray],
    detections,
    palette,
    resolution: int = DEFAULT_RESOLUTION,
    sigma: float = DEFAULT_BLUR_SIGMA,
    dilation_radius: int = DEFAULT_DILATION_RADIUS,
    score_threshold: float = DEFAULT_SCORE_THRESHOLD,
) -> SceneInput:
    """Produce the (I_B, I_L) pair for one source image.

    Every person mask is erased from the background in one pass, the result
    is blurred at native resolution, then square padding and the resize to
    the network resolution follow. The layout is rendered directly at the
    network resolution from detections mapped through the same square
    frame, keeping box edges crisp.
    """
    h, w = image.shape[:2]
    if person_masks:
        union = np.zeros((h, w), dtype=bool)
        for m in person_masks:
            union |= m.astype(bool)
        erased = erase_person(image, union, dilation_radius=dilation_radius)
    else:
        erased = image.copy()
    blurred = blur(erased, sigma)
    padded, frame = pad_image_to_square(blurred)
    ib = imgio.resize_rgb(padded, resolution, resolution)

    scale = resolution / frame.s
    scaled = []
    for category, box, score in detections:
        sbox = PixelBox(
            (box.x_min + frame.offset_x) * scale,
            (box.y_min + frame.offset_y) * scale,
            (box.x_max + frame.offset_x) * scale,
            (box.y_max + frame.offset_y) * scale,
        )
        scaled.append((category, sbox, score))
    il = render_layout(scaled, palette, (resolution, resolution), score_threshold)
    return SceneInput(ib=ib, il=il, frame=frame, native_width=w, native_height=h)


def _disk(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    yy, xx = np.meshgrid(span, span, indexing="ij")
    return (yy * yy + xx * xx) <= radius * radius
