"""Minimal RGB image IO built on Pillow.

All in-memory images in this package are uint8 RGB arrays of shape
(H, W, 3); masks are bool arrays of shape (H, W).
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image


def load_rgb(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def decode_rgb(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"))


def save_png(path: str | Path, image: np.ndarray) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    _to_pil(image).save(path, format="PNG")


def encode_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    _to_pil(image).save(buf, format="PNG")
    return buf.getvalue()


def load_mask(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L")) > 127


def mask_to_image(mask: np.ndarray) -> np.ndarray:
    return (mask.astype(np.uint8)) * 255


def resize_rgb(image: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize of a uint8 RGB image."""
    pil = Image.fromarray(image).resize((width, height), Image.BILINEAR)
    return np.asarray(pil)


def _to_pil(image: np.ndarray) -> Image.Image:
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    if arr.ndim == 2:
        return Image.fromarray(arr, mode="L")
    return Image.fromarray(arr, mode="RGB")
