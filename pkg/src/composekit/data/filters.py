"""Instance filtering: occlusion, edge proximity, and minimum size."""

from __future__ import annotations

from dataclasses import dataclass

from composekit.data.coco import AnnotationRecord, InstanceAnnotation
from composekit.geometry import iou


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds for the three filtering passes.

    An instance survives when its IoU with every other instance stays at or
    below ``max_iou``, its box keeps at least ``min_edge_distance`` pixels
    from every image edge, and its box area reaches ``min_area``.
    """

    max_iou: float = 0.3
    min_edge_distance: float = 18.0
    min_area: float = 2500.0
    # Compare IoU against instances of every category; set False to only
    # consider instances of the filtered category itself.
    iou_against_all: bool = True


def filter_instances(
    records: list[AnnotationRecord] | AnnotationRecord,
    category: str = "person",
    config: FilterConfig = FilterConfig(),
) -> list[tuple[AnnotationRecord, InstanceAnnotation]]:
    """Select well-isolated, complete, sufficiently large instances.

    Crowd-flagged instances are never kept, but they still count as
    neighbors for the overlap pass. Output order follows the input record
    order, then instance id, so the result is independent of how instances
    were ordered inside each record.
    """
    if isinstance(records, AnnotationRecord):
        records = [records]

    kept: list[tuple[AnnotationRecord, InstanceAnnotation]] = []
    for record in records:
        for inst in sorted(record.instances, key=lambda i: i.instance_id):
            if inst.category != category or inst.crowd:
                continue
            if not _passes_overlap(inst, record, category, config):
                continue
            if not _passes_edge_distance(inst, record, config):
                continue
            if inst.box.area < config.min_area:
                continue
            kept.append((record, inst))
    return kept


def _passes_overlap(inst, record, category, config) -> bool:
    for other in record.instances:
        if other.instance_id == inst.instance_id:
            continue
        if not config.iou_against_all and other.category != category:
            continue
        if iou(inst.box, other.box) > config.max_iou:
            return False
    return True


def _passes_edge_distance(inst, record, config) -> bool:
    d = min(
        inst.box.x_min,
        inst.box.y_min,
        record.width - inst.box.x_max,
        record.height - inst.box.y_max,
    )
    return d >= config.min_edge_distance
