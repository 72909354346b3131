"""Descriptor extractors behind a common interface.

An extractor exposes ``descriptor_dim`` and ``extract(image) -> vector``.
Raw outputs need not be normalized; pool construction L2-normalizes each
half separately so the global and local parts carry equal weight.
"""

from __future__ import annotations

import numpy as np

from composekit import imgio


class HistogramFeatureExtractor:
    """Deterministic toy descriptor: a joint RGB histogram.

    Exists so retrieval runs (and is testable) without pretrained weights.
    ``bins`` cells per channel give a ``bins**3`` histogram, zero-padded to
    ``descriptor_dim``.
    """

    def __init__(self, descriptor_dim: int = 64, bins: int = 4):
        if bins ** 3 > descriptor_dim:
            raise ValueError(f"bins^3 ({bins ** 3}) exceeds descriptor_dim ({descriptor_dim})")
        self.descriptor_dim = descriptor_dim
        self.bins = bins
        self.name = f"histogram-{bins}x{bins}x{bins}-pad{descriptor_dim}"

    def extract(self, image: np.ndarray) -> np.ndarray:
        # Downsample first so the histogram reflects coarse composition,
        # not pixel noise.
        small = imgio.resize_rgb(image, 32, 32) if image.shape[0] > 32 else image
        q = (small.astype(np.int64) * self.bins) // 256
        flat = (q[..., 0] * self.bins + q[..., 1]) * self.bins + q[..., 2]
        hist = np.bincount(flat.reshape(-1), minlength=self.bins ** 3).astype(np.float32)
        hist /= max(1.0, hist.sum())
        out = np.zeros(self.descriptor_dim, dtype=np.float32)
        out[: self.bins ** 3] = hist
        return out


class ResNet50FeatureExtractor:
    """Mean-pooled activations of a residual classification backbone.

    Needs a weights file (state dict) on disk; this environment cannot
    download pretrained checkpoints. 2048-dim output, preprocessing is
    resize to 224 plus the usual channel standardization.
    """

    descriptor_dim = 2048

    def __init__(self, weights_path: str | None = None):
        import torch
        import torchvision

        self._torch = torch
        model = torchvision.models.resnet50(weights=None)
        if weights_path is not None:
            model.load_state_dict(torch.load(weights_path, map_location="cpu"))
        model.fc = torch.nn.Identity()
        self._model = model.eval()
        self.name = f"resnet50-avgpool({weights_path or 'random-init'})"
        self._mean = np.array([0.485, 0.456, 0.406], dtype=np.float32)
        self._std = np.array([0.229, 0.224, 0.225], dtype=np.float32)

    def extract(self, image: np.ndarray) -> np.ndarray:
        torch = self._torch
        resized = imgio.resize_rgb(image, 224, 224).astype(np.float32) / 255.0
        arr = (resized - self._mean) / self._std
        x = torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)
        with torch.no_grad():
            return self._model(x)[0].numpy()
