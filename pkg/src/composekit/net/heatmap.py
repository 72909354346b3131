"""Location-heatmap rendering for predictions."""

from __future__ import annotations

import cv2
import numpy as np
from matplotlib import colormaps

from composekit.geometry import SquareFrame, denormalize_box_clipped
from composekit.net.inference import PlacementPrediction

BOX_COLOR = (0, 255, 0)


def export_heatmap(
    prediction: PlacementPrediction,
    size: tuple[int, int],
    background: np.ndarray | None = None,
    frame: SquareFrame | None = None,
    alpha: float = 0.5,
    draw_box: bool = True,
    cmap: str = "jet",
) -> np.ndarray:
    """Upsample the location map to ``size`` (w, h) and color-map it.

    With a ``frame``, the grid is interpreted in square-frame coordinates
    and cropped back to the original image region, so the heatmap aligns
    with the native background. When ``background`` is given the map is
    alpha-blended over it. The top-1 box is drawn as an outline.
    """
    width, height = size
    probs = prediction.loc_probs.astype(np.float64)
    peak = probs.max()
    norm = probs / peak if peak > 0 else probs

    if frame is not None and (frame.offset_x or frame.offset_y):
        full = cv2.resize(norm, (frame.s, frame.s), interpolation=cv2.INTER_LINEAR)
        crop = full[frame.offset_y:frame.offset_y + height,
                    frame.offset_x:frame.offset_x + width]
        scaled = cv2.resize(crop, (width, height), interpolation=cv2.INTER_LINEAR)
    else:
        scaled = cv2.resize(norm, (width, height), interpolation=cv2.INTER_LINEAR)

    lut = colormaps[cmap]
    colored = (lut(np.clip(scaled, 0, 1))[..., :3] * 255).astype(np.uint8)

    if background is not None:
        out = (alpha * colored.astype(np.float64)
               + (1 - alpha) * background.astype(np.float64))
        out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    else:
        out = colored

    if draw_box and prediction.boxes:
        box_frame = frame if frame is not None else SquareFrame(max(width, height), 0, 0)
        try:
            box = denormalize_box_clipped(prediction.top_box, box_frame, width, height)
        except ValueError:
            return out
        x0, y0 = int(round(box.x_min)), int(round(box.y_min))
        x1, y1 = int(round(box.x_max)) - 1, int(round(box.y_max)) - 1
        x0, x1 = np.clip([x0, x1], 0, width - 1)
        y0, y1 = np.clip([y0, y1], 0, height - 1)
        out[y0:y1 + 1, [x0, x1]] = BOX_COLOR
        out[[y0, y1], x0:x1 + 1] = BOX_COLOR
    return out
