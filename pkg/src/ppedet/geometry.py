"""Bounding-box types, format conversions, and the IOU overlap metric.

All boxes live in normalized image coordinates: every field is a fraction
of image width or height in [0, 1].  Pixel units appear only at file-format
boundaries, never in metric math.

Two box forms are used throughout the toolkit:

- ``BBox``      -- center form (x_center, y_center, width, height), the
                   annotation and detection interchange format.
- ``CornerBox`` -- corner form (x_min, y_min, x_max, y_max), the canonical
                   form for intersection arithmetic.  Corner boxes are
                   unit-agnostic: only the ordering invariants are enforced,
                   so absolute-pixel rectangles are valid inputs to ``iou``.

Center<->corner conversions use the plain half-extent formulas and are exact
mutual inverses whenever the center and half-extents are exactly
representable (e.g. coordinates on a dyadic grid); IEEE-754 corner form
cannot encode a width finer than one ulp of the corner magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    """Center-form box, all fields normalized fractions in [0, 1]."""

    x_center: float
    y_center: float
    width: float
    height: float

    def __post_init__(self) -> None:
        for name in ("x_center", "y_center", "width", "height"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"BBox.{name} must be finite, got {v!r}")
            if v < 0.0 or v > 1.0:
                raise ValueError(f"BBox.{name} must be in [0, 1], got {v!r}")


@dataclass(frozen=True)
class CornerBox:
    """Corner-form box; any units, only min <= max is required."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_min > self.x_max:
            raise ValueError(f"x_min {self.x_min!r} > x_max {self.x_max!r}")
        if self.y_min > self.y_max:
            raise ValueError(f"y_min {self.y_min!r} > y_max {self.y_max!r}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class Detection:
    """A decoded detector output: class, confidence score, and box."""

    class_id: int
    confidence: float
    bbox: BBox

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence!r}")


@dataclass(frozen=True)
class GroundTruthBox:
    """A hand-labeled reference box tied to an image."""

    class_id: int
    bbox: BBox
    image_id: str

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")


def center_to_corner(b: BBox) -> CornerBox:
    """Convert center form to corner form (no clipping)."""
    half_w = b.width * 0.5
    half_h = b.height * 0.5
    return CornerBox(
        x_min=b.x_center - half_w,
        y_min=b.y_center - half_h,
        x_max=b.x_center + half_w,
        y_max=b.y_center + half_h,
    )


def corner_to_center(c: CornerBox) -> BBox:
    """Convert corner form back to center form; inverse of center_to_corner."""
    return BBox(
        x_center=(c.x_min + c.x_max) * 0.5,
        y_center=(c.y_min + c.y_max) * 0.5,
        width=c.x_max - c.x_min,
        height=c.y_max - c.y_min,
    )


def iou(a: CornerBox, b: CornerBox) -> float:
    """Intersection-over-union of two corner boxes.

    Returns intersection_area / union_area in [0, 1].  When the union has
    zero area (two degenerate boxes) the result is defined as 0.0 so the
    metric is total.
    """
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union
