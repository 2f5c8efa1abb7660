"""SSD-style default box generation and head decoding.

Default boxes are laid out over several square feature maps.  For layer k
with scale s_k, every cell gets one box per aspect ratio a (width s_k * sqrt(a),
height s_k / sqrt(a)) centered on the cell center, plus, when enabled and a
next scale exists, one square box at the geometric mean sqrt(s_k * s_{k+1}).
Output order is (layer, row-major cell, ratio index, extra box last) and
boxes are clipped to the unit square in corner form.

Decoding follows the standard variance-scaled transforms against each
default box and scores classes with a softmax whose index 0 is background;
foreground score index c maps to detection class_id c - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BBox, CornerBox, Detection, center_to_corner, corner_to_center
from .tensors import Tensor

_MAX_SIZE_EXPONENT = 50.0


@dataclass(frozen=True)
class DefaultBoxSpec:
    """Default-box layout: one entry per source layer plus decode variances.

    ``scales`` holds one scale per layer, optionally followed by one extra
    entry that only anchors the last layer's geometric-mean box (it may
    exceed 1 for that reason).  ``variances`` are the four positive decode
    divisors (cx, cy, w, h).
    """

    feature_map_sizes: tuple[int, ...]
    scales: tuple[float, ...]
    aspect_ratios: tuple[tuple[float, ...], ...]
    variances: tuple[float, float, float, float] = (0.1, 0.1, 0.2, 0.2)
    include_extra_box: bool = True

    def __post_init__(self) -> None:
        maps = tuple(int(f) for f in self.feature_map_sizes)
        if not maps:
            raise ValueError("feature_map_sizes must be non-empty")
        for idx, f in enumerate(maps):
            if f < 1:
                raise ValueError(f"feature_map_sizes[{idx}] must be >= 1, got {f}")
        n = len(maps)
        scales = tuple(float(s) for s in self.scales)
        if len(scales) not in (n, n + 1):
            raise ValueError(
                f"scales must have {n} or {n + 1} entries for {n} layers, got {len(scales)}"
            )
        for idx, s in enumerate(scales):
            if s <= 0.0:
                raise ValueError(f"scales[{idx}] must be positive, got {s}")
            if idx < n and s > 1.0:
                raise ValueError(f"scales[{idx}] must be in (0, 1], got {s}")
        ratios = tuple(tuple(float(a) for a in layer) for layer in self.aspect_ratios)
        if len(ratios) != n:
            raise ValueError(f"aspect_ratios must have one list per layer ({n}), got {len(ratios)}")
        for idx, layer in enumerate(ratios):
            if not layer:
                raise ValueError(f"aspect_ratios[{idx}] must be non-empty")
            if any(a <= 0.0 for a in layer):
                raise ValueError(f"aspect_ratios[{idx}] must be positive, got {layer}")
        variances = tuple(float(v) for v in self.variances)
        if len(variances) != 4 or any(v <= 0.0 for v in variances):
            raise ValueError(f"variances must be 4 positive values, got {self.variances}")
        object.__setattr__(self, "feature_map_sizes", maps)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "aspect_ratios", ratios)
        object.__setattr__(self, "variances", variances)

    def boxes_per_cell(self, layer: int) -> int:
        extra = 1 if self.include_extra_box and layer + 1 < len(self.scales) else 0
        return len(self.aspect_ratios[layer]) + extra

    def total_boxes(self) -> int:
        return sum(
            f * f * self.boxes_per_cell(layer)
            for layer, f in enumerate(self.feature_map_sizes)
        )


def ssd300_default_spec() -> DefaultBoxSpec:
    """The canonical 300x300 six-layer configuration (8732 boxes)."""
    return DefaultBoxSpec(
        feature_map_sizes=(38, 19, 10, 5, 3, 1),
        scales=(0.1, 0.2, 0.37, 0.54, 0.71, 0.88, 1.05),
        aspect_ratios=(
            (1.0, 2.0, 0.5),
            (1.0, 2.0, 0.5, 3.0, 1 / 3),
            (1.0, 2.0, 0.5, 3.0, 1 / 3),
            (1.0, 2.0, 0.5, 3.0, 1 / 3),
            (1.0, 2.0, 0.5),
            (1.0, 2.0, 0.5),
        ),
    )


def _clipped_box(x_center: float, y_center: float, width: float, height: float) -> BBox:
    corner = center_to_corner(
        BBox(
            x_center=min(max(x_center, 0.0), 1.0),
            y_center=min(max(y_center, 0.0), 1.0),
            width=min(width, 1.0),
            height=min(height, 1.0),
        )
    )
    clipped = CornerBox(
        x_min=min(max(corner.x_min, 0.0), 1.0),
        y_min=min(max(corner.y_min, 0.0), 1.0),
        x_max=min(max(corner.x_max, 0.0), 1.0),
        y_max=min(max(corner.y_max, 0.0), 1.0),
    )
    return corner_to_center(clipped)


def generate_default_boxes(spec: DefaultBoxSpec) -> list[BBox]:
    """All default boxes in (layer, row-major cell, ratio, extra) order."""
    boxes: list[BBox] = []
    for layer, f in enumerate(spec.feature_map_sizes):
        scale = spec.scales[layer]
        extra_size = None
        if spec.include_extra_box and layer + 1 < len(spec.scales):
            extra_size = math.sqrt(scale * spec.scales[layer + 1])
        for row in range(f):
            cy = (row + 0.5) / f
            for col in range(f):
                cx = (col + 0.5) / f
                for a in spec.aspect_ratios[layer]:
                    root = math.sqrt(a)
                    boxes.append(_clipped_box(cx, cy, scale * root, scale / root))
                if extra_size is not None:
                    boxes.append(_clipped_box(cx, cy, extra_size, extra_size))
    return boxes


@dataclass(frozen=True)
class SsdRawOutput:
    """Raw head output: (N, 4) location offsets and (N, C+1) class logits.

    Index 0 of the score axis is the background class.
    """

    loc: np.ndarray
    scores: np.ndarray

    def __post_init__(self) -> None:
        loc = np.array(self.loc, dtype=np.float32)
        scores = np.array(self.scores, dtype=np.float32)
        if loc.ndim != 2 or loc.shape[1] != 4:
            raise ValueError(f"loc must have shape (N, 4), got {loc.shape}")
        if scores.ndim != 2 or scores.shape[1] < 2:
            raise ValueError(f"scores must have shape (N, C+1) with C >= 1, got {scores.shape}")
        if loc.shape[0] != scores.shape[0]:
            raise ValueError(
                f"loc has {loc.shape[0]} boxes but scores has {scores.shape[0]}"
            )
        if not (np.all(np.isfinite(loc)) and np.all(np.isfinite(scores))):
            raise ValueError("SsdRawOutput values must be finite")
        loc.setflags(write=False)
        scores.setflags(write=False)
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_tensors(cls, loc: Tensor, scores: Tensor) -> "SsdRawOutput":
        if len(loc.dims) != 2 or loc.dims[1] != 4:
            raise ValueError(f"loc tensor must have dims (N, 4), got {loc.dims}")
        if len(scores.dims) != 2:
            raise ValueError(f"scores tensor must have dims (N, C+1), got {scores.dims}")
        return cls(loc.as_array(), scores.as_array())

    @property
    def num_boxes(self) -> int:
        return int(self.loc.shape[0])

    @property
    def num_classes(self) -> int:
        """Foreground class count (score width minus background)."""
        return int(self.scores.shape[1]) - 1


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax in float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def decode_ssd(
    raw: SsdRawOutput,
    defaults: list[BBox],
    spec: DefaultBoxSpec,
    conf_threshold: float,
) -> list[Detection]:
    """Decode offsets against default boxes and softmax the class scores.

    Every foreground class with probability >= threshold yields its own
    detection, so one box can emit several.  Output order is box index,
    then class index ascending.  Centers and sizes are clamped to the unit
    square after the transform.
    """
    if raw.num_boxes != len(defaults):
        raise ValueError(f"raw output has {raw.num_boxes} boxes, got {len(defaults)} defaults")
    if not (0.0 <= conf_threshold <= 1.0):
        raise ValueError(f"conf_threshold must be in [0, 1], got {conf_threshold!r}")

    d = np.array(
        [[b.x_center, b.y_center, b.width, b.height] for b in defaults], dtype=np.float64
    ).reshape(-1, 4)
    loc = raw.loc.astype(np.float64)
    v0, v1, v2, v3 = spec.variances
    x = d[:, 0] + loc[:, 0] * v0 * d[:, 2]
    y = d[:, 1] + loc[:, 1] * v1 * d[:, 3]
    w = d[:, 2] * np.exp(np.minimum(loc[:, 2] * v2, _MAX_SIZE_EXPONENT))
    h = d[:, 3] * np.exp(np.minimum(loc[:, 3] * v3, _MAX_SIZE_EXPONENT))
    x = np.clip(x, 0.0, 1.0)
    y = np.clip(y, 0.0, 1.0)
    w = np.clip(w, 0.0, 1.0)
    h = np.clip(h, 0.0, 1.0)

    probs = softmax_rows(raw.scores)
    keep = probs[:, 1:] >= conf_threshold
    detections: list[Detection] = []
    for box_idx, fg_idx in np.argwhere(keep):
        detections.append(
            Detection(
                class_id=int(fg_idx),
                confidence=float(probs[box_idx, fg_idx + 1]),
                bbox=BBox(
                    x_center=float(x[box_idx]),
                    y_center=float(y[box_idx]),
                    width=float(w[box_idx]),
                    height=float(h[box_idx]),
                ),
            )
        )
    return detections
