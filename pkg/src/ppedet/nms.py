"""Class-wise hard non-maximum suppression.

Suppression is greedy per class: detections are visited in confidence
order (ties broken by input position) and kept only while their overlap
with every kept detection of the same class stays below the threshold.
Detections of different classes never interact.  Boxes are never modified,
so the output is a sub-multiset of the input.
"""

from __future__ import annotations

from .geometry import Detection, center_to_corner, iou


def nms_classwise(detections: list[Detection], iou_threshold: float) -> list[Detection]:
    """Suppress overlapping same-class detections.

    A detection survives iff its IOU with every higher-ranked surviving
    detection of its class is strictly below ``iou_threshold``.  The result
    is ordered by confidence descending, then class id, then input index,
    which makes runs reproducible when confidences tie.
    """
    if not (0.0 <= iou_threshold <= 1.0):
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold!r}")
    corners = [center_to_corner(d.bbox) for d in detections]
    by_class: dict[int, list[int]] = {}
    for idx, det in enumerate(detections):
        by_class.setdefault(det.class_id, []).append(idx)

    kept: list[int] = []
    for indices in by_class.values():
        order = sorted(indices, key=lambda i: (-detections[i].confidence, i))
        kept_here: list[int] = []
        for i in order:
            if all(iou(corners[i], corners[j]) < iou_threshold for j in kept_here):
                kept_here.append(i)
        kept.extend(kept_here)

    kept.sort(key=lambda i: (-detections[i].confidence, detections[i].class_id, i))
    return [detections[i] for i in kept]
