"""Layout-distribution evaluation: 15x15 histograms and their correlation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from matplotlib import colormaps

from composekit.compositing import CompositeSpec, blend, feather_matte, place_segment
from composekit.geometry import GRID_SIZE, NormalizedBox, encode_cell
from composekit.net.inference import predict


# Full-dataset reference targets for this method (tens of thousands of
# training instances); desk-scale runs on synthetic corpora are validated
# against thresholds instead.
REFERENCE_POSITION_CORRELATION = 0.9458
REFERENCE_SIZE_CORRELATION = 0.9378


class UndefinedCorrelationError(ValueError):
    """Raised when either histogram has zero variance."""


@dataclass
class Histogram2D:
    """Non-negative bin counts over the 15x15 grid.

    ``axis`` records the semantics: "position" bins (x_stand, y_stand),
    "size" bins (w, h).
    """

    axis: str = "position"
    counts: np.ndarray = field(default_factory=lambda: np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.int64))

    def add(self, nbox: NormalizedBox) -> None:
        if self.axis == "position":
            cell = encode_cell(nbox.x_stand, nbox.y_stand)
        else:
            cell = encode_cell(nbox.w, nbox.h)
        self.counts[cell.row, cell.col] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "Histogram2D") -> "Histogram2D":
        if other.axis != self.axis:
            raise ValueError("cannot merge histograms with different axes")
        return Histogram2D(axis=self.axis, counts=self.counts + other.counts)


def accumulate(boxes: list[NormalizedBox]) -> tuple[Histogram2D, Histogram2D]:
    """Bin every box into one position cell and one size cell."""
    position = Histogram2D(axis="position")
    size = Histogram2D(axis="size")
    for nbox in boxes:
        position.add(nbox)
        size.add(nbox)
    return position, size


def correlation(a: Histogram2D | np.ndarray, b: Histogram2D | np.ndarray) -> float:
    """Pearson correlation over all bins, in [-1, 1].

    d = sum((A - mean A)(B - mean B)) / sqrt(sum(A - mean A)^2 sum(B - mean B)^2)
    """
    av = (a.counts if isinstance(a, Histogram2D) else np.asarray(a)).astype(np.float64).ravel()
    bv = (b.counts if isinstance(b, Histogram2D) else np.asarray(b)).astype(np.float64).ravel()
    if av.shape != bv.shape:
        raise ValueError(f"histogram shapes differ: {av.shape} vs {bv.shape}")
    ac = av - av.mean()
    bc = bv - bv.mean()
    denom = np.sqrt((ac * ac).sum() * (bc * bc).sum())
    if denom == 0:
        raise UndefinedCorrelationError(
            "correlation undefined: at least one histogram is constant")
    return float((ac * bc).sum() / denom)


@dataclass
class EvalReport:
    position_correlation: float
    size_correlation: float
    n_samples: int
    truth_position: Histogram2D
    truth_size: Histogram2D
    predicted_position: Histogram2D
    predicted_size: Histogram2D

    def to_dict(self) -> dict:
        return {
            "position_correlation": self.position_correlation,
            "size_correlation": self.size_correlation,
            "n_samples": self.n_samples,
        }

    def histogram_images(self, cell_px: int = 16) -> dict[str, np.ndarray]:
        return {
            "truth_position": render_histogram(self.truth_position, cell_px),
            "predicted_position": render_histogram(self.predicted_position, cell_px),
            "truth_size": render_histogram(self.truth_size, cell_px),
            "predicted_size": render_histogram(self.predicted_size, cell_px),
        }


def evaluate_model(model, samples) -> EvalReport:
    """Compare predicted top-1 placements against ground truth.

    ``samples`` carry person-erased scenes plus their ground-truth
    normalized boxes (one entry per erased instance). Both correlations
    use the 15x15 histograms of Eq-style Pearson form.
    """
    if len(samples) == 0:
        raise ValueError("evaluation requires a non-empty sample set")
    from composekit.data.scene import SceneInput
    from composekit.geometry import pad_to_square

    truth_boxes, pred_boxes = [], []
    for sample in samples:
        truth_boxes.append(sample.nbox)
        r = sample.ib.shape[0]
        scene = SceneInput(ib=sample.ib, il=sample.il, frame=pad_to_square(r, r),
                           native_width=r, native_height=r)
        pred_boxes.append(predict(model, scene).top_box)

    truth_pos, truth_size = accumulate(truth_boxes)
    pred_pos, pred_size = accumulate(pred_boxes)
    return EvalReport(
        position_correlation=correlation(truth_pos, pred_pos),
        size_correlation=correlation(truth_size, pred_size),
        n_samples=len(samples),
        truth_position=truth_pos,
        truth_size=truth_size,
        predicted_position=pred_pos,
        predicted_size=pred_size,
    )


def render_histogram(hist: Histogram2D, cell_px: int = 16, cmap: str = "viridis") -> np.ndarray:
    """Color-mapped nearest-neighbor upscale of the bin grid."""
    counts = hist.counts.astype(np.float64)
    peak = counts.max()
    norm = counts / peak if peak > 0 else counts
    lut = colormaps[cmap]
    colored = (lut(norm)[..., :3] * 255).astype(np.uint8)
    return np.kron(colored, np.ones((cell_px, cell_px, 1), dtype=np.uint8))


def render_silhouette(spec: CompositeSpec, pool) -> np.ndarray:
    """Composite with each person filled uniform white.

    Geometry matches the textured composite exactly (same placement, same
    matte); the fill is binary at the matte's 0.5 level, so output pixels
    are pure white precisely where alpha > 0.5.
    """
    image = spec.background.copy()
    for segment_id, box in spec.placements:
        record = pool.get(segment_id)
        placed = place_segment(record, box)
        matte = feather_matte(placed.mask, spec.feather_radius)
        hard = type(matte)(alpha=(matte.alpha > 0.5).astype(np.float32))
        image = blend(image, np.full_like(placed.rgb, 255), hard, placed.offset)
    return image
