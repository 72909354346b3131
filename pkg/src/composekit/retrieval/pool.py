"""Candidate pool: construction, kd-tree cosine retrieval, and archive IO."""

from __future__ import annotations

import io
import json
import logging
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from composekit import imgio
from composekit.data.coco import load_coco_annotations
from composekit.data.filters import FilterConfig, filter_instances
from composekit.geometry import PixelBox, center_aligned_iou
from composekit.retrieval.records import SegmentRecord

log = logging.getLogger(__name__)

SIZE_IOU_THRESHOLD = 0.4
MIN_PATCH_SIDE = 8


class PoolBuildError(RuntimeError):
    pass


@dataclass
class QueryResult:
    """Ranked matches; ``all_size_filtered`` flags an empty result caused
    purely by the size prefilter (the caller may relax the threshold)."""

    matches: list[tuple[SegmentRecord, float]]
    all_size_filtered: bool = False


@dataclass
class UICandidates:
    records: list[SegmentRecord]
    padded: bool = False    # size filter relaxed to fill up to k
    short: bool = False     # pool smaller than k, padding impossible
    distances: list[float] = field(default_factory=list)


def _normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0:
        raise ValueError("descriptor has zero norm; cannot L2-normalize")
    return (vec / norm).astype(np.float32)


def extract_global(image: np.ndarray, extractor) -> np.ndarray:
    """Scene-level descriptor of the whole image, L2-normalized."""
    try:
        return _normalize(np.asarray(extractor.extract(image), dtype=np.float32))
    except Exception as exc:
        raise RuntimeError(f"global descriptor extraction failed: {exc}") from exc


def extract_local(image: np.ndarray, box: PixelBox, extractor) -> np.ndarray:
    """Context descriptor of the 2x-scaled, same-center patch around ``box``."""
    h, w = image.shape[:2]
    cx, cy = box.center
    x0 = int(max(0, round(cx - box.width)))
    x1 = int(min(w, round(cx + box.width)))
    y0 = int(max(0, round(cy - box.height)))
    y1 = int(min(h, round(cy + box.height)))
    if x1 - x0 < MIN_PATCH_SIDE or y1 - y0 < MIN_PATCH_SIDE:
        raise ValueError(
            f"context patch degenerate after clipping: {(x0, y0, x1, y1)}")
    return extract_global(image[y0:y1, x0:x1], extractor)


class CosineKDTree:
    """Exact cosine-distance index over rows of equal-norm descriptors.

    Rows are concatenations of two unit-norm halves (norm sqrt(2)), so
    cosine distance is ``1 - dot/2`` with range [0, 2] and Euclidean
    distance is monotone in it — a kd-tree prunes candidates exactly.
    """

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.tree = cKDTree(self.matrix)

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def query(self, query_vec: np.ndarray, k: int,
              mask: np.ndarray | None = None) -> list[tuple[int, float]]:
        """Exact top-k rows by cosine distance, ties to lowest row index.

        The tree prunes by Euclidean distance; final distances come from
        the direct dot-product formula (in float64) so results match brute
        force, expanding the search whenever boundary ties make pruning
        unsafe.
        """
        qvec = np.asarray(query_vec, dtype=np.float32)
        n = len(self)
        eligible = int(mask.sum()) if mask is not None else n
        if eligible == 0:
            return []
        k = min(k, eligible)

        k_search = min(n, max(4 * k, k + 16))
        while True:
            d_e, idx = self.tree.query(qvec, k=k_search)
            d_e = np.atleast_1d(d_e)
            idx = np.atleast_1d(idx)
            surv = idx if mask is None else idx[mask[idx]]
            if k_search >= n:
                break
            if len(surv) >= k:
                kth = np.sort(d_e[mask[idx]] if mask is not None else d_e)[k - 1]
                # Safe to stop only when nothing beyond the horizon can tie.
                if d_e[-1] > kth * (1 + 1e-9) + 1e-12:
                    break
            k_search = min(n, k_search * 2)

        dists = 1.0 - self.matrix[surv].astype(np.float64) @ qvec.astype(np.float64) / 2.0
        order = sorted(range(len(surv)), key=lambda i: (dists[i], surv[i]))
        return [(int(surv[i]), float(dists[i])) for i in order[:k]]


class CandidatePool:
    """Immutable segment collection with an exact cosine kd-tree index.

    Records are kept sorted by segment id, so index-order tie-breaks are
    segment-id tie-breaks and results never depend on insertion order.
    """

    def __init__(self, records: list[SegmentRecord], build_params: dict | None = None):
        if not records:
            raise PoolBuildError("candidate pool is empty")
        ids = [r.segment_id for r in records]
        if len(set(ids)) != len(ids):
            raise PoolBuildError(f"duplicate segment ids in pool: {len(ids) - len(set(ids))}")
        self.records = sorted(records, key=lambda r: r.segment_id)
        self.index = CosineKDTree(np.stack([r.descriptor for r in self.records]))
        self.build_params = dict(build_params or {})
        self.build_params.setdefault("pool_size", len(self.records))
        self._sizes = np.array([r.normalized_size for r in self.records])
        self._by_id = {r.segment_id: r for r in self.records}

    @property
    def matrix(self) -> np.ndarray:
        return self.index.matrix

    def __len__(self) -> int:
        return len(self.records)

    def get(self, segment_id: str) -> SegmentRecord:
        record = self._by_id.get(segment_id)
        if record is None:
            raise KeyError(f"unknown segment id: {segment_id}")
        return record

    def __contains__(self, segment_id: str) -> bool:
        return segment_id in self._by_id

    def size_filter_mask(self, query_size: tuple[float, float],
                         threshold: float = SIZE_IOU_THRESHOLD) -> np.ndarray:
        ious = np.array([
            center_aligned_iou(query_size, (w, h)) for w, h in self._sizes
        ])
        return ious >= threshold

    def nearest(self, query_vec: np.ndarray, k: int,
                mask: np.ndarray | None = None) -> list[tuple[int, float]]:
        return self.index.query(query_vec, k, mask)

    def query(self, image: np.ndarray, box: PixelBox, extractor, k: int = 1,
              size_threshold: float = SIZE_IOU_THRESHOLD) -> QueryResult:
        """Two-step retrieval: size prefilter, then cosine ranking.

        Candidates whose center-aligned box-size IoU with the query falls
        below the threshold are excluded before the descriptor search.
        """
        qvec = self.query_vector(image, box, extractor)
        mask = self.size_filter_mask(self._query_size(image, box), size_threshold)
        if not mask.any():
            return QueryResult(matches=[], all_size_filtered=True)
        rows = self.nearest(qvec, k, mask)
        return QueryResult(matches=[(self.records[i], d) for i, d in rows])

    def query_vector(self, image, box, extractor) -> np.ndarray:
        return np.concatenate([
            extract_global(image, extractor),
            extract_local(image, box, extractor),
        ])

    @staticmethod
    def _query_size(image, box) -> tuple[float, float]:
        s = float(max(image.shape[0], image.shape[1]))
        return (box.width / s, box.height / s)

    # ------------------------------------------------------------------
    # Archive IO: manifest JSON + raw float32 descriptor matrix + PNGs.
    # ------------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        manifest = {
            "build_params": self.build_params,
            "descriptor_dim": int(self.matrix.shape[1]),
            "records": [{
                "segment_id": r.segment_id,
                "source_image": r.source_image,
                "box": list(r.box.as_xywh()),
                "source_width": r.source_width,
                "source_height": r.source_height,
                "metadata": r.metadata,
            } for r in self.records],
        }
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            zf.writestr("manifest.json", json.dumps(manifest, indent=2))
            zf.writestr("descriptors.bin",
                        np.ascontiguousarray(self.matrix, dtype="<f4").tobytes())
            for r in self.records:
                zf.writestr(f"masks/{r.segment_id}.png",
                            imgio.encode_png(imgio.mask_to_image(r.mask)))
                zf.writestr(f"crops/{r.segment_id}.png", imgio.encode_png(r.crop))


def load_pool(path: str | Path) -> CandidatePool:
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        dim = manifest["descriptor_dim"]
        raw = np.frombuffer(zf.read("descriptors.bin"), dtype="<f4")
        matrix = raw.reshape(-1, dim)
        records = []
        for i, meta in enumerate(manifest["records"]):
            sid = meta["segment_id"]
            mask = imgio.decode_rgb(zf.read(f"masks/{sid}.png"))[:, :, 0] > 127
            crop = imgio.decode_rgb(zf.read(f"crops/{sid}.png"))
            records.append(SegmentRecord(
                segment_id=sid,
                source_image=meta["source_image"],
                box=PixelBox.from_xywh(*meta["box"]),
                source_width=meta["source_width"],
                source_height=meta["source_height"],
                mask=mask,
                crop=crop,
                global_desc=matrix[i, :dim // 2].copy(),
                local_desc=matrix[i, dim // 2:].copy(),
                metadata=meta.get("metadata", {}),
            ))
    return CandidatePool(records, manifest["build_params"])


def build_pool(
    annotations_path: str | Path,
    images_dir: str | Path,
    extractor,
    filters: FilterConfig = FilterConfig(),
    category: str = "person",
    metadata: dict | None = None,
) -> CandidatePool:
    """Assemble the pool from an annotated dataset.

    Applies the standard instance filters, then stores per segment the
    global descriptor of its source image (person present) and the local
    descriptor of its 2x context patch.
    """
    images_dir = Path(images_dir)
    records = []
    surviving = filter_instances(load_coco_annotations(annotations_path), category, filters)
    image_cache: dict[int, np.ndarray] = {}
    for record, inst in surviving:
        if record.image_id not in image_cache:
            try:
                image_cache[record.image_id] = imgio.load_rgb(images_dir / record.file_name)
            except FileNotFoundError:
                log.warning("missing image %s; its segments are skipped", record.file_name)
                image_cache[record.image_id] = None
        image = image_cache[record.image_id]
        if image is None:
            continue
        mask = inst.decode_mask(record.height, record.width)
        if not mask.any():
            log.warning("instance %s has an empty mask; skipped", inst.instance_id)
            continue
        x0, y0 = int(inst.box.x_min), int(inst.box.y_min)
        x1 = min(record.width, int(np.ceil(inst.box.x_max)))
        y1 = min(record.height, int(np.ceil(inst.box.y_max)))
        crop_mask = mask[y0:y1, x0:x1]
        if not crop_mask.any():
            continue
        try:
            gdesc = extract_global(image, extractor)
            ldesc = extract_local(image, inst.box, extractor)
        except (RuntimeError, ValueError) as exc:
            log.warning("descriptor failure on instance %s: %s", inst.instance_id, exc)
            continue
        records.append(SegmentRecord(
            segment_id=f"{record.image_id:08d}_{inst.instance_id:08d}",
            source_image=record.file_name,
            box=inst.box,
            source_width=record.width,
            source_height=record.height,
            mask=crop_mask,
            crop=image[y0:y1, x0:x1].copy(),
            global_desc=gdesc,
            local_desc=ldesc,
            metadata=metadata or {},
        ))
    if not records:
        raise PoolBuildError("no segments survived filtering; pool would be empty")
    log.info("pool built with %d segments", len(records))
    return CandidatePool(records, {
        "extractor": getattr(extractor, "name", type(extractor).__name__),
        "category": category,
        "size_iou_threshold": SIZE_IOU_THRESHOLD,
        "filters": {
            "max_iou": filters.max_iou,
            "min_edge_distance": filters.min_edge_distance,
            "min_area": filters.min_area,
        },
    })


def top_candidates_for_ui(pool: CandidatePool, image: np.ndarray, box: PixelBox,
                          extractor, k: int = 9) -> UICandidates:
    """Top-k candidates for display, padding past the size filter if needed."""
    result = pool.query(image, box, extractor, k=k)
    records = [r for r, _ in result.matches]
    distances = [d for _, d in result.matches]
    padded = False
    if len(records) < k:
        # Relax the size filter: take the globally nearest leftovers.
        qvec = pool.query_vector(image, box, extractor)
        have = {r.segment_id for r in records}
        for row, dist in pool.nearest(qvec, k=len(pool)):
            record = pool.records[row]
            if record.segment_id in have:
                continue
            records.append(record)
            distances.append(dist)
            padded = True
            if len(records) == k:
                break
    return UICandidates(
        records=records,
        padded=padded,
        short=len(records) < k,
        distances=distances,
    )
