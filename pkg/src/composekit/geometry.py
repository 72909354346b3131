"""Bounding-box representations and the square-frame / grid codecs.

Boxes exist at three levels:

* ``PixelBox`` — corner coordinates in the source image (origin top-left).
* ``NormalizedBox`` — standing-point coordinates relative to the padded
  square frame, all components in [0, 1].
* ``GridCell`` — the discretized class index on the 15x15 grid used by the
  placement network, for both location and size targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

GRID_SIZE = 15

# Conventional ImageNet channel means in 0-255 RGB, used as padding color.
IMAGENET_MEAN_RGB = (124, 116, 104)


@dataclass(frozen=True)
class PixelBox:
    """Axis-aligned box in pixel coordinates, y pointing down."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"box coordinates must be finite: {vals}")
        if min(vals) < 0:
            raise ValueError(f"box coordinates must be >= 0: {vals}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box must have positive extent: {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def shifted(self, dx: float, dy: float) -> "PixelBox":
        return PixelBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def as_xywh(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.width, self.height)

    @staticmethod
    def from_xywh(x: float, y: float, w: float, h: float) -> "PixelBox":
        return PixelBox(x, y, x + w, y + h)


@dataclass(frozen=True)
class SquareFrame:
    """Geometry of an image padded to a square of side ``s``.

    ``offset_x``/``offset_y`` give the translation applied to the original
    image content inside the square.
    """

    s: int
    offset_x: int
    offset_y: int

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("square side must be positive")
        if self.offset_x < 0 or self.offset_y < 0:
            raise ValueError("offsets must be non-negative")


@dataclass(frozen=True)
class NormalizedBox:
    """Standing-point box representation relative to a square frame.

    ``(x_stand, y_stand)`` is the bottom-center point of the box, both in
    [0, 1]; ``w``/``h`` are the box extent relative to the square side.
    """

    x_stand: float
    y_stand: float
    w: float
    h: float

    _TOL = 1e-6

    def __post_init__(self):
        if not (-self._TOL <= self.x_stand <= 1 + self._TOL):
            raise ValueError(f"x_stand out of [0,1]: {self.x_stand}")
        if not (-self._TOL <= self.y_stand <= 1 + self._TOL):
            raise ValueError(f"y_stand out of [0,1]: {self.y_stand}")
        if not (0 < self.w <= 1 + self._TOL):
            raise ValueError(f"w out of (0,1]: {self.w}")
        if not (0 < self.h <= 1 + self._TOL):
            raise ValueError(f"h out of (0,1]: {self.h}")


@dataclass(frozen=True)
class GridCell:
    """One cell of the 15x15 grid; ``index`` is the row-major class label."""

    col: int
    row: int

    def __post_init__(self):
        if not (0 <= self.col < GRID_SIZE and 0 <= self.row < GRID_SIZE):
            raise ValueError(f"cell out of range: col={self.col} row={self.row}")

    @property
    def index(self) -> int:
        return self.row * GRID_SIZE + self.col

    @staticmethod
    def from_index(index: int) -> "GridCell":
        if not (0 <= index < GRID_SIZE * GRID_SIZE):
            raise ValueError(f"cell index out of range: {index}")
        return GridCell(col=index % GRID_SIZE, row=index // GRID_SIZE)


def pad_to_square(width: int, height: int) -> SquareFrame:
    """Compute the minimal square frame containing a width x height image.

    Padding is split evenly over the two sides of the short dimension, with
    the odd extra pixel going to the right/bottom.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"image dimensions must be positive: {width}x{height}")
    s = max(width, height)
    return SquareFrame(s=s, offset_x=(s - width) // 2, offset_y=(s - height) // 2)


def normalize_box(box: PixelBox, frame: SquareFrame) -> NormalizedBox:
    """Map a pixel box (original image coords) into the square frame.

    The box is shifted by the frame offsets, then reduced to the standing
    point ``x_stand = (x_min + x_max) / 2s``, ``y_stand = y_max / s`` plus
    the relative size ``(w, h)``.
    """
    s = float(frame.s)
    x_min = box.x_min + frame.offset_x
    x_max = box.x_max + frame.offset_x
    y_max = box.y_max + frame.offset_y
    return NormalizedBox(
        x_stand=_clamp01((x_min + x_max) / (2.0 * s)),
        y_stand=_clamp01(y_max / s),
        w=box.width / s,
        h=box.height / s,
    )


def denormalize_box(nbox: NormalizedBox, frame: SquareFrame) -> PixelBox:
    """Inverse of :func:`normalize_box`, back to original image coords."""
    s = float(frame.s)
    w = nbox.w * s
    h = nbox.h * s
    cx = nbox.x_stand * s
    y_max = nbox.y_stand * s
    x_min = cx - w / 2.0 - frame.offset_x
    y_min = y_max - h - frame.offset_y
    # Absorb float dust at the image origin without relocating the box.
    if -1e-6 * s < x_min < 0:
        x_min = 0.0
    if -1e-6 * s < y_min < 0:
        y_min = 0.0
    return PixelBox(x_min, y_min, x_min + w, y_min + h)


def denormalize_box_clipped(
    nbox: NormalizedBox, frame: SquareFrame, width: int, height: int
) -> PixelBox:
    """Denormalize and intersect with the original image bounds.

    Predicted boxes decoded from grid-cell centers can spill outside the
    frame; this clips them to the ``width x height`` image and rejects
    boxes left with no interior.
    """
    s = float(frame.s)
    w = nbox.w * s
    h = nbox.h * s
    cx = nbox.x_stand * s - frame.offset_x
    y_max = nbox.y_stand * s - frame.offset_y
    x_min = max(0.0, cx - w / 2.0)
    y_min = max(0.0, y_max - h)
    x_max = min(float(width), cx + w / 2.0)
    y_max = min(float(height), y_max)
    if x_max - x_min < 1e-9 or y_max - y_min < 1e-9:
        raise ValueError("box falls entirely outside the image after clipping")
    return PixelBox(x_min, y_min, x_max, y_max)


def encode_cell(u: float, v: float) -> GridCell:
    """Discretize a pair of [0,1] coordinates onto the grid.

    The closed upper edge maps to the last cell, so the codec is total
    on [0,1]^2. The same codec serves (x_stand, y_stand) and (w, h).
    """
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise ValueError(f"coordinates must lie in [0,1]: ({u}, {v})")
    col = min(int(u * GRID_SIZE), GRID_SIZE - 1)
    row = min(int(v * GRID_SIZE), GRID_SIZE - 1)
    return GridCell(col=col, row=row)


def decode_cell(cell: GridCell) -> tuple[float, float]:
    """Continuous cell-center coordinates of a grid cell."""
    return ((cell.col + 0.5) / GRID_SIZE, (cell.row + 0.5) / GRID_SIZE)


def iou(a: PixelBox, b: PixelBox) -> float:
    """Intersection over union of two pixel boxes, in [0, 1]."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def center_aligned_iou(size_a: tuple[float, float], size_b: tuple[float, float]) -> float:
    """IoU of two boxes after translating them onto a common center.

    A pure size-compatibility measure: equals
    ``min(w)min(h) / (wa*ha + wb*hb - min(w)min(h))``.
    """
    wa, ha = size_a
    wb, hb = size_b
    if wa <= 0 or ha <= 0 or wb <= 0 or hb <= 0:
        raise ValueError(f"sizes must be positive: {size_a} vs {size_b}")
    inter = min(wa, wb) * min(ha, hb)
    return inter / (wa * ha + wb * hb - inter)


def _clamp01(v: float) -> float:
    return 0.0 if v < 0.0 else (1.0 if v > 1.0 else v)
