"""Seeded random color palette mapping detection categories to fill colors."""

from __future__ import annotations

import numpy as np

_BACKGROUND = (0, 0, 0)


class Palette:
    """Deterministic category -> RGB map.

    Colors are drawn from a seeded generator in sorted-category order, so
    the same (categories, seed) pair always yields the same palette.
    Colors are pairwise distinct and never equal to the black background.
    """

    def __init__(self, colors: dict[str, tuple[int, int, int]], seed: int):
        self.seed = seed
        self._colors = dict(colors)
        self._rng = np.random.default_rng(seed ^ 0x5EED)

    @classmethod
    def generate(cls, categories, seed: int = 0) -> "Palette":
        rng = np.random.default_rng(seed)
        colors: dict[str, tuple[int, int, int]] = {}
        used = {_BACKGROUND}
        for cat in sorted(set(categories)):
            color = _draw_color(rng, used)
            colors[cat] = color
            used.add(color)
        return cls(colors, seed)

    def color_for(self, category: str) -> tuple[int, int, int]:
        """Color for a category, lazily assigning unseen categories."""
        if category not in self._colors:
            used = {_BACKGROUND, *self._colors.values()}
            self._colors[category] = _draw_color(self._rng, used)
        return self._colors[category]

    def to_dict(self) -> dict:
        return {"seed": self.seed, "colors": {k: list(v) for k, v in self._colors.items()}}

    @classmethod
    def from_dict(cls, data: dict) -> "Palette":
        return cls({k: tuple(v) for k, v in data["colors"].items()}, data["seed"])

    def __len__(self) -> int:
        return len(self._colors)


def _draw_color(rng, used) -> tuple[int, int, int]:
    while True:
        color = tuple(int(c) for c in rng.integers(0, 256, size=3))
        if color not in used:
            return color
