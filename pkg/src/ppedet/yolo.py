"""Decode grid-based (YOLO-style) raw head tensors into detections.

A head tensor has dims (S, S, depth): S x S grid cells in (row, column)
order, each holding ``num_anchors`` attribute blocks laid out as

    [t_x, t_y, t_w, t_h, t_obj, class_0 .. class_{C-1}]

so depth = B * (4 + 1 + C).  Decoding applies the standard transforms:
sigmoid on center offsets and objectness, exponential on sizes against the
anchor priors, and per-class independent sigmoid scores (multi-label, not
softmax).  One call decodes one scale; multi-scale detectors decode each
scale tensor separately and concatenate the results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import BBox, Detection
from .tensors import Tensor

# exp(50) is ~5e21, far beyond any normalized box size; clamping here keeps
# math.exp off its overflow range for float32-sized logits.
_MAX_SIZE_LOGIT = 50.0


@dataclass(frozen=True)
class YoloHeadSpec:
    """Geometry of one detection scale: grid size, anchor priors, classes."""

    grid_size: int
    num_anchors: int
    num_classes: int
    anchors: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if self.grid_size < 1:
            raise ValueError(f"grid_size must be >= 1, got {self.grid_size}")
        if self.num_anchors < 1:
            raise ValueError(f"num_anchors must be >= 1, got {self.num_anchors}")
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        anchors = tuple((float(w), float(h)) for w, h in self.anchors)
        if len(anchors) != self.num_anchors:
            raise ValueError(
                f"got {len(anchors)} anchors, spec declares num_anchors={self.num_anchors}"
            )
        for idx, (w, h) in enumerate(anchors):
            if w <= 0.0 or h <= 0.0:
                raise ValueError(f"anchors[{idx}] must have positive extents, got {(w, h)}")
        object.__setattr__(self, "anchors", anchors)


def head_depth(spec: YoloHeadSpec) -> int:
    """Per-cell channel count: anchors x (4 box terms + objectness + classes)."""
    return spec.num_anchors * (spec.num_classes + 4 + 1)


def _sigmoid(v: float) -> float:
    if v >= 0.0:
        return 1.0 / (1.0 + math.exp(-v))
    e = math.exp(v)
    return e / (1.0 + e)


def decode_yolo(head: Tensor, spec: YoloHeadSpec, conf_threshold: float) -> list[Detection]:
    """Decode one head tensor, keeping detections with confidence >= threshold.

    Box centers land strictly inside the cell that produced them:
    (cx + sigmoid(t_x)) / S.  Sizes are anchor * exp(t), capped at 1.0 so
    the result stays a valid normalized box.  Confidence is
    sigmoid(t_obj) * sigmoid(best class logit).  Output order is row-major
    over cells, then anchor index; finiteness of the input is guaranteed by
    the Tensor type.
    """
    depth = head_depth(spec)
    expected = (spec.grid_size, spec.grid_size, depth)
    if head.dims != expected:
        raise ValueError(f"head dims {head.dims} do not match spec dims {expected}")
    if not (0.0 <= conf_threshold <= 1.0):
        raise ValueError(f"conf_threshold must be in [0, 1], got {conf_threshold!r}")

    arr = head.as_array()
    s = spec.grid_size
    block = 4 + 1 + spec.num_classes
    detections: list[Detection] = []
    for cy in range(s):
        for cx in range(s):
            cell = arr[cy, cx]
            for b in range(spec.num_anchors):
                off = b * block
                t_x, t_y, t_w, t_h, t_obj = (float(v) for v in cell[off : off + 5])
                logits = cell[off + 5 : off + block]
                k = int(np.argmax(logits))
                confidence = _sigmoid(t_obj) * _sigmoid(float(logits[k]))
                if confidence < conf_threshold:
                    continue
                anchor_w, anchor_h = spec.anchors[b]
                bbox = BBox(
                    x_center=(cx + _sigmoid(t_x)) / s,
                    y_center=(cy + _sigmoid(t_y)) / s,
                    width=min(anchor_w * math.exp(min(t_w, _MAX_SIZE_LOGIT)), 1.0),
                    height=min(anchor_h * math.exp(min(t_h, _MAX_SIZE_LOGIT)), 1.0),
                )
                detections.append(Detection(k, confidence, bbox))
    return detections
