"""Two-stage inference: location first, then size conditioned on location."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from composekit.data.scene import SceneInput
from composekit.geometry import GridCell, NormalizedBox, decode_cell
from composekit.net.model import PlacementNet, scene_to_tensor

PROB_TOL = 1e-5


@dataclass
class PlacementPrediction:
    """Decoded outputs for one scene.

    ``loc_probs`` is the full g x g location distribution; ``cells`` holds
    the selected location cells in rank order with one size distribution
    each; ``boxes`` holds the decoded (location, size) combinations ordered
    by joint probability.
    """

    loc_probs: np.ndarray
    cells: list[GridCell]
    size_probs: list[np.ndarray]
    boxes: list[NormalizedBox]
    box_cells: list[tuple[GridCell, GridCell]] = field(default_factory=list)

    @property
    def cell(self) -> GridCell:
        return self.cells[0]

    @property
    def top_box(self) -> NormalizedBox:
        return self.boxes[0]

    def __post_init__(self):
        if abs(float(self.loc_probs.sum()) - 1.0) > PROB_TOL:
            raise ValueError("location probabilities must sum to 1")
        for p in self.size_probs:
            if abs(float(p.sum()) - 1.0) > PROB_TOL:
                raise ValueError("size probabilities must sum to 1")
        if (self.loc_probs < 0).any() or any((p < 0).any() for p in self.size_probs):
            raise ValueError("probabilities must be non-negative")


@torch.no_grad()
def predict(model: PlacementNet, scene: SceneInput, k_loc: int = 1,
            k_size: int = 1) -> PlacementPrediction:
    """Run the cascade: top-k location cells, then one size pass per cell.

    Deterministic given fixed weights; exact probability ties resolve to
    the lowest class index.
    """
    model.eval()
    g = model.grid_size
    x = scene_to_tensor(scene.ib, scene.il).unsqueeze(0)
    features = model.trunk(x)
    loc_logits = model.location_logits(features)
    loc_probs = torch.softmax(loc_logits, dim=1)[0].numpy()

    k_loc = min(k_loc, g * g)
    top_cells = _stable_topk(loc_probs, k_loc)
    cells = [GridCell.from_index(int(i)) for i in top_cells]
    model.last_slice_source = "predicted"

    cell_tensor = torch.tensor([c.index for c in cells], dtype=torch.long)
    feats = features.expand(len(cells), -1, -1, -1)
    size_logits = model.size_logits(feats, cell_tensor)
    size_probs = torch.softmax(size_logits, dim=1).numpy()

    combos = []
    for li, cell in enumerate(cells):
        top_sizes = _stable_topk(size_probs[li], min(k_size, size_probs.shape[1]))
        for si in top_sizes:
            joint = float(loc_probs[cell.index] * size_probs[li][si])
            combos.append((joint, li, int(si), cell))
    combos.sort(key=lambda t: (-t[0], t[1], t[2]))

    boxes, box_cells = [], []
    for _, li, si, cell in combos:
        size_cell = GridCell.from_index(si)
        boxes.append(_decode_box(cell, size_cell))
        box_cells.append((cell, size_cell))

    return PlacementPrediction(
        loc_probs=loc_probs.reshape(g, g),
        cells=cells,
        size_probs=[size_probs[i] for i in range(len(cells))],
        boxes=boxes,
        box_cells=box_cells,
    )


@torch.no_grad()
def predict_multi(model: PlacementNet, scene: SceneInput, n_people: int) -> list[PlacementPrediction]:
    """Pick ``n_people`` location cells by repeated suppressed argmax.

    After each pick the 3x3 neighborhood around the chosen cell is
    suppressed; if suppression exhausts the map before enough picks, the
    remaining (unpicked) cells become eligible again.
    """
    g = model.grid_size
    if n_people < 1:
        raise ValueError("n_people must be >= 1")
    if n_people > g * g:
        raise ValueError(f"n_people ({n_people}) exceeds the {g * g} grid cells")

    model.eval()
    x = scene_to_tensor(scene.ib, scene.il).unsqueeze(0)
    features = model.trunk(x)
    loc_probs = torch.softmax(model.location_logits(features), dim=1)[0].numpy()

    chosen = select_suppressed_cells(loc_probs, n_people, g)
    cells = [GridCell.from_index(i) for i in chosen]
    cell_tensor = torch.tensor(chosen, dtype=torch.long)
    feats = features.expand(len(cells), -1, -1, -1)
    size_probs = torch.softmax(model.size_logits(feats, cell_tensor), dim=1).numpy()
    model.last_slice_source = "predicted"

    out = []
    for i, cell in enumerate(cells):
        size_cell = GridCell.from_index(int(_stable_topk(size_probs[i], 1)[0]))
        out.append(PlacementPrediction(
            loc_probs=loc_probs.reshape(g, g),
            cells=[cell],
            size_probs=[size_probs[i]],
            boxes=[_decode_box(cell, size_cell)],
            box_cells=[(cell, size_cell)],
        ))
    return out


def select_suppressed_cells(loc_probs: np.ndarray, n: int, grid: int) -> list[int]:
    """Repeated argmax with 3x3 neighborhood suppression around each pick.

    If every cell gets suppressed before ``n`` picks, the suppression (but
    not the picks themselves) is lifted for the remainder.
    """
    working = loc_probs.reshape(-1).astype(np.float64).copy()
    original = working.copy()
    chosen: list[int] = []
    for _ in range(n):
        if np.all(np.isneginf(working)):
            working = original.copy()
            working[chosen] = -np.inf
        pick = int(_stable_topk(working, 1)[0])
        chosen.append(pick)
        row, col = divmod(pick, grid)
        for r in range(max(0, row - 1), min(grid, row + 2)):
            for c in range(max(0, col - 1), min(grid, col + 2)):
                working[r * grid + c] = -np.inf
    return chosen


def _decode_box(loc_cell: GridCell, size_cell: GridCell) -> NormalizedBox:
    x_stand, y_stand = decode_cell(loc_cell)
    w, h = decode_cell(size_cell)
    return NormalizedBox(x_stand=x_stand, y_stand=y_stand, w=w, h=h)


def _stable_topk(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest values; exact ties go to the lowest index."""
    order = np.argsort(-values, kind="stable")
    return order[:k]
