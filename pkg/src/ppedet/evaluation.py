"""COCO-style detector evaluation: greedy matching, precision/recall
curves, 101-point interpolated average precision, and the 12-row
mAP / mAR report matrix (IOU range x area bucket x detection cap).

Conventions, fixed so that independent implementations can agree exactly:

- Detections are ranked per image by (confidence desc, input index asc),
  truncated to the per-image cap, then pooled across images in confidence
  order with ties resolved by per-image rank, then ascending image id.
  Rank-major tie order is what makes duplicating every image leave all
  metrics unchanged: each detection's copy lands right next to it.
- Matching scans ground truths with in-range boxes first (stable order),
  requires IOU >= threshold, prefers the highest IOU with ties going to
  the last ground truth scanned, and uses each ground truth at most once.
  A detection matched to an out-of-range ground truth is ignored; an
  unmatched detection whose own box is out of range is ignored instead of
  counted as a false positive.
- Box pixel areas are (width * image_width) * (height * image_height);
  area buckets are half-open intervals [lo, hi) partitioning [0, inf).
- Precision is tp / (tp + fp) with no epsilon; the recall grid is
  {0.00, 0.01, ..., 1.00}; the precision envelope is the running maximum
  from the right; cells with zero in-range ground truths report the
  sentinel -1 and are excluded from every average.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .geometry import BBox, Detection, GroundTruthBox, center_to_corner, iou

RECALL_GRID = np.arange(101) / 100.0

AREA_NAMES = ("all", "small", "medium", "large")


def default_iou_thresholds() -> tuple[float, ...]:
    """0.50 to 0.95 in steps of 0.05."""
    return tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


def default_area_ranges() -> dict[str, tuple[float, float]]:
    """Pixel-area buckets at the 32^2 and 96^2 boundaries."""
    return {
        "all": (0.0, math.inf),
        "small": (0.0, 32.0**2),
        "medium": (32.0**2, 96.0**2),
        "large": (96.0**2, math.inf),
    }


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation grid: IOU thresholds, area buckets, caps, image sizes."""

    iou_thresholds: tuple[float, ...] = field(default_factory=default_iou_thresholds)
    area_ranges: Mapping[str, tuple[float, float]] = field(default_factory=default_area_ranges)
    max_dets: tuple[int, ...] = (1, 10, 100)
    image_dims: Mapping[str, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        thresholds = tuple(float(t) for t in self.iou_thresholds)
        if not thresholds:
            raise ValueError("iou_thresholds must be non-empty")
        for t in thresholds:
            if not 0.0 < t <= 1.0:
                raise ValueError(f"iou_thresholds must lie in (0, 1], got {t}")
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError(f"iou_thresholds must be strictly increasing, got {thresholds}")

        ranges = {str(k): (float(v[0]), float(v[1])) for k, v in dict(self.area_ranges).items()}
        if set(ranges) != set(AREA_NAMES):
            raise ValueError(f"area_ranges must define exactly {AREA_NAMES}, got {sorted(ranges)}")
        for name, (lo, hi) in ranges.items():
            if lo < 0 or hi <= lo:
                raise ValueError(f"area_ranges[{name!r}] must satisfy 0 <= lo < hi, got {(lo, hi)}")
        if ranges["all"] != (0.0, math.inf):
            raise ValueError(f"area_ranges['all'] must be (0, inf), got {ranges['all']}")
        # small/medium/large must partition [0, inf) without gaps or overlap
        if (
            ranges["small"][0] != 0.0
            or ranges["small"][1] != ranges["medium"][0]
            or ranges["medium"][1] != ranges["large"][0]
            or ranges["large"][1] != math.inf
        ):
            raise ValueError(
                "small/medium/large ranges must chain from 0 to inf: "
                f"got {ranges['small']}, {ranges['medium']}, {ranges['large']}"
            )

        caps = tuple(int(m) for m in self.max_dets)
        if not caps or any(m < 1 for m in caps):
            raise ValueError(f"max_dets must be positive, got {self.max_dets}")
        if any(b <= a for a, b in zip(caps, caps[1:])):
            raise ValueError(f"max_dets must be strictly increasing, got {caps}")

        dims = {str(k): (int(w), int(h)) for k, (w, h) in dict(self.image_dims).items()}
        for image_id, (w, h) in dims.items():
            if w < 1 or h < 1:
                raise ValueError(f"image_dims[{image_id!r}] must be positive, got {(w, h)}")

        object.__setattr__(self, "iou_thresholds", thresholds)
        object.__setattr__(self, "area_ranges", ranges)
        object.__setattr__(self, "max_dets", caps)
        object.__setattr__(self, "image_dims", dims)


class DetOutcome(Enum):
    TP = "tp"
    FP = "fp"
    IGNORED = "ignored"


class GtOutcome(Enum):
    MATCHED = "matched"
    MISSED = "missed"  # an in-range ground truth nothing matched: a FN
    IGNORED = "ignored"


@dataclass(frozen=True)
class DetMatch:
    """One detection's fate, in the pooled confidence-ranked sweep."""

    image_id: str
    confidence: float
    outcome: DetOutcome
    gt_index: int | None = None  # index into that image's ground-truth list


@dataclass(frozen=True)
class GtMatch:
    image_id: str
    index: int
    outcome: GtOutcome


@dataclass(frozen=True)
class MatchResult:
    """Matching for one (class, IOU threshold, area range, cap) cell.

    ``detections`` is in the pooled sweep order; ``num_gt`` counts in-range
    ground truths, the TP + FN denominator.
    """

    detections: tuple[DetMatch, ...]
    ground_truths: tuple[GtMatch, ...]
    num_gt: int


def pixel_area(bbox: BBox, dims: tuple[int, int]) -> float:
    width_px, height_px = dims
    return (bbox.width * width_px) * (bbox.height * height_px)


def _in_range(area: float, area_range: tuple[float, float]) -> bool:
    lo, hi = area_range
    return lo <= area < hi


def _match_one(
    det_index: int,
    ious_m: np.ndarray,
    gt_order: Sequence[int],
    gt_ignored: Sequence[bool],
    matched: Sequence[bool],
    gate: float,
) -> int:
    """Greedy choice for one detection: best unmatched ground truth.

    In-range ground truths come first in ``gt_order``; once a real match is
    in hand, the ignored section cannot improve it, so the scan stops
    there.  Equal IOUs resolve to the last ground truth scanned.
    """
    best = -1
    best_iou = gate
    for gi in gt_order:
        if matched[gi]:
            continue
        if best > -1 and not gt_ignored[best] and gt_ignored[gi]:
            break
        v = ious_m[det_index, gi]
        if v < best_iou:
            continue
        best_iou = v
        best = gi
    return best


def _ranked_class_dets(dets: Sequence[Detection], class_id: int, cap: int) -> list[Detection]:
    mine = [d for d in dets if d.class_id == class_id]
    order = sorted(range(len(mine)), key=lambda i: (-mine[i].confidence, i))
    return [mine[i] for i in order[:cap]]


def _check_images(
    dets_by_image: Mapping[str, Sequence[Detection]],
    gts_by_image: Mapping[str, Sequence[GroundTruthBox]],
    image_dims: Mapping[str, tuple[int, int]],
) -> list[str]:
    images = sorted(set(dets_by_image) | set(gts_by_image))
    for image_id in images:
        if image_id not in image_dims:
            raise ValueError(f"unknown image id {image_id!r}: no dimensions entry")
        for g in gts_by_image.get(image_id, []):
            if g.image_id != image_id:
                raise ValueError(
                    f"ground truth under image {image_id!r} carries image_id {g.image_id!r}"
                )
    return images


def match_detections(
    dets_by_image: Mapping[str, Sequence[Detection]],
    gts_by_image: Mapping[str, Sequence[GroundTruthBox]],
    class_id: int,
    iou_threshold: float,
    area_range: tuple[float, float],
    max_dets_cap: int,
    image_dims: Mapping[str, tuple[int, int]],
) -> MatchResult:
    """Match one class at one threshold/area/cap across all images."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold!r}")
    if max_dets_cap < 1:
        raise ValueError(f"max_dets_cap must be >= 1, got {max_dets_cap}")
    lo, hi = float(area_range[0]), float(area_range[1])
    if lo < 0 or hi <= lo:
        raise ValueError(f"area_range must satisfy 0 <= lo < hi, got {area_range}")

    images = _check_images(dets_by_image, gts_by_image, image_dims)
    gate = min(iou_threshold, 1.0 - 1e-10)

    det_records: list[tuple[float, int, int, DetMatch]] = []  # (-conf, rank, img pos, rec)
    gt_records: list[GtMatch] = []
    num_gt = 0
    for img_pos, image_id in enumerate(images):
        dims = image_dims[image_id]
        dts = _ranked_class_dets(dets_by_image.get(image_id, []), class_id, max_dets_cap)
        gts = [g for g in gts_by_image.get(image_id, []) if g.class_id == class_id]

        gt_ignored = [not _in_range(pixel_area(g.bbox, dims), (lo, hi)) for g in gts]
        num_gt += gt_ignored.count(False)
        gt_order = sorted(range(len(gts)), key=lambda i: gt_ignored[i])
        gt_corners = [center_to_corner(g.bbox) for g in gts]
        ious_m = np.array(
            [[iou(center_to_corner(d.bbox), gc) for gc in gt_corners] for d in dts],
            dtype=np.float64,
        ).reshape(len(dts), len(gts))

        matched = [False] * len(gts)
        match_of = [-1] * len(gts)
        for rank, det in enumerate(dts):
            best = _match_one(rank, ious_m, gt_order, gt_ignored, matched, gate)
            if best > -1:
                matched[best] = True
                match_of[best] = rank
                outcome = DetOutcome.IGNORED if gt_ignored[best] else DetOutcome.TP
                rec = DetMatch(image_id, det.confidence, outcome, best)
            elif not _in_range(pixel_area(det.bbox, dims), (lo, hi)):
                rec = DetMatch(image_id, det.confidence, DetOutcome.IGNORED, None)
            else:
                rec = DetMatch(image_id, det.confidence, DetOutcome.FP, None)
            det_records.append((-det.confidence, rank, img_pos, rec))

        for gi in range(len(gts)):
            if gt_ignored[gi]:
                outcome = GtOutcome.IGNORED
            elif matched[gi]:
                outcome = GtOutcome.MATCHED
            else:
                outcome = GtOutcome.MISSED
            gt_records.append(GtMatch(image_id, gi, outcome))

    det_records.sort(key=lambda r: (r[0], r[1], r[2]))
    return MatchResult(
        detections=tuple(r[3] for r in det_records),
        ground_truths=tuple(gt_records),
        num_gt=num_gt,
    )


@dataclass(frozen=True)
class PrecisionRecallCurve:
    """(recall, precision) points swept over the pooled confidence ranking."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        last_recall = 0.0
        for recall, precision in self.points:
            if not (0.0 <= recall <= 1.0 and 0.0 <= precision <= 1.0):
                raise ValueError(f"curve point out of [0, 1]: {(recall, precision)}")
            if recall < last_recall:
                raise ValueError("recall must be non-decreasing along the sweep")
            last_recall = recall


def pr_curve(match: MatchResult, num_gt: int) -> PrecisionRecallCurve:
    """Cumulative precision/recall over the sweep, skipping ignored detections."""
    if num_gt < 0:
        raise ValueError(f"num_gt must be >= 0, got {num_gt}")
    tp = fp = 0
    points = []
    for det in match.detections:
        if det.outcome is DetOutcome.IGNORED:
            continue
        if det.outcome is DetOutcome.TP:
            tp += 1
        else:
            fp += 1
        recall = tp / num_gt if num_gt > 0 else 0.0
        points.append((recall, tp / (tp + fp)))
    return PrecisionRecallCurve(tuple(points))


def average_precision(curve: PrecisionRecallCurve) -> float:
    """101-point interpolated AP; an empty curve scores 0."""
    if not curve.points:
        return 0.0
    rc = np.array([p[0] for p in curve.points], dtype=np.float64)
    pr = np.array([p[1] for p in curve.points], dtype=np.float64)
    envelope = np.maximum.accumulate(pr[::-1])[::-1]
    indices = np.searchsorted(rc, RECALL_GRID, side="left")
    sampled = np.zeros(RECALL_GRID.size, dtype=np.float64)
    valid = indices < rc.size
    sampled[valid] = envelope[indices[valid]]
    return float(sampled.mean())


@dataclass(frozen=True)
class ReportRow:
    metric: str  # "mAP" or "mAR"
    iou: str  # e.g. "0.50:0.95", "0.50", "0.75"
    area: str
    max_dets: int
    value: float  # in [0, 1], or -1 when the cell has no ground truths

    def __post_init__(self) -> None:
        if self.value != -1.0 and not (0.0 <= self.value <= 1.0):
            raise ValueError(f"row value must be in [0, 1] or the -1 sentinel, got {self.value}")


@dataclass(frozen=True)
class EvalReport:
    """The 12-row report: 6 precision rows then 6 recall rows."""

    rows: tuple[ReportRow, ...]
    per_class_ap: Mapping[int, float] | None = None

    def to_text(self) -> str:
        fmt = "{:<24} {:<10} {:<8} {:>7}"
        lines = []
        for metric, title in (("mAP", "Mean Average Precision"), ("mAR", "Mean Average Recall")):
            lines.append(fmt.format(title, "IOU", "Area", "maxDets"))
            for row in self.rows:
                if row.metric == metric:
                    lines.append(fmt.format(f"{row.value:.3f}", row.iou, row.area, row.max_dets))
        if self.per_class_ap is not None:
            lines.append("")
            lines.append("AP by class (IOU-range average, all areas):")
            for class_id in sorted(self.per_class_ap):
                lines.append(f"  class {class_id}: {self.per_class_ap[class_id]:.3f}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(
            [
                {
                    "metric": r.metric,
                    "iou": r.iou,
                    "area": r.area,
                    "maxDets": r.max_dets,
                    "value": r.value,
                }
                for r in self.rows
            ],
            indent=2,
        )


def _threshold_label(thresholds: Sequence[float]) -> str:
    if len(thresholds) == 1:
        return f"{thresholds[0]:.2f}"
    return f"{thresholds[0]:.2f}:{thresholds[-1]:.2f}"


def full_report(
    dets_by_image: Mapping[str, Sequence[Detection]],
    gts_by_image: Mapping[str, Sequence[GroundTruthBox]],
    config: EvalConfig,
    class_ids: Sequence[int] | None = None,
    per_class: bool = False,
) -> EvalReport:
    """Evaluate everything and assemble the 12-row table.

    Precision rows: the full IOU range, then 0.50 and 0.75 alone (reported
    as -1 when not among the configured thresholds), then the small,
    medium, and large buckets over the full range, all at the largest cap.
    Recall rows: the "all" bucket at each cap, then small/medium/large at
    the largest cap.  Classes default to every class id present in the
    ground truths or detections.
    """
    images = _check_images(dets_by_image, gts_by_image, config.image_dims)
    if class_ids is None:
        found = {d.class_id for ds in dets_by_image.values() for d in ds}
        found |= {g.class_id for gs in gts_by_image.values() for g in gs}
        class_ids = sorted(found)
    class_ids = list(class_ids)

    thresholds = config.iou_thresholds
    caps = config.max_dets
    num_t, num_k, num_a, num_m = len(thresholds), len(class_ids), len(AREA_NAMES), len(caps)
    ap = np.full((num_t, num_k, num_a, num_m), -1.0)
    ar = np.full((num_t, num_k, num_a, num_m), -1.0)

    for k_idx, class_id in enumerate(class_ids):
        prepared = []
        for image_id in images:
            dims = config.image_dims[image_id]
            dts = _ranked_class_dets(dets_by_image.get(image_id, []), class_id, caps[-1])
            gts = [g for g in gts_by_image.get(image_id, []) if g.class_id == class_id]
            gt_corners = [center_to_corner(g.bbox) for g in gts]
            prepared.append(
                {
                    "confs": np.array([d.confidence for d in dts], dtype=np.float64),
                    "det_areas": [pixel_area(d.bbox, dims) for d in dts],
                    "gt_areas": [pixel_area(g.bbox, dims) for g in gts],
                    "ious": np.array(
                        [[iou(center_to_corner(d.bbox), gc) for gc in gt_corners] for d in dts],
                        dtype=np.float64,
                    ).reshape(len(dts), len(gts)),
                }
            )

        for a_idx, area_name in enumerate(AREA_NAMES):
            area_range = config.area_ranges[area_name]
            num_gt = 0
            pooled = []  # per image: (confs, tp[T, nd], ignored[T, nd])
            for prep in prepared:
                gt_ignored = [not _in_range(a, area_range) for a in prep["gt_areas"]]
                num_gt += gt_ignored.count(False)
                gt_order = sorted(range(len(gt_ignored)), key=lambda i: gt_ignored[i])
                det_out = [not _in_range(a, area_range) for a in prep["det_areas"]]
                nd = len(prep["confs"])
                tp_flags = np.zeros((num_t, nd), dtype=bool)
                ig_flags = np.zeros((num_t, nd), dtype=bool)
                for t_idx, threshold in enumerate(thresholds):
                    gate = min(threshold, 1.0 - 1e-10)
                    matched = [False] * len(gt_ignored)
                    for di in range(nd):
                        best = _match_one(di, prep["ious"], gt_order, gt_ignored, matched, gate)
                        if best > -1:
                            matched[best] = True
                            if gt_ignored[best]:
                                ig_flags[t_idx, di] = True
                            else:
                                tp_flags[t_idx, di] = True
                        elif det_out[di]:
                            ig_flags[t_idx, di] = True
                pooled.append((prep["confs"], tp_flags, ig_flags))

            if num_gt == 0:
                continue  # the whole (class, area) slab keeps the -1 sentinel

            for m_idx, cap in enumerate(caps):
                capped = [p[0][:cap] for p in pooled]
                confs = np.concatenate(capped)
                ranks = np.concatenate([np.arange(c.size) for c in capped])
                tp_all = np.concatenate([p[1][:, :cap] for p in pooled], axis=1)
                ig_all = np.concatenate([p[2][:, :cap] for p in pooled], axis=1)
                # confidence desc, then per-image rank; lexsort is stable so
                # remaining ties fall back to image position
                order = np.lexsort((ranks, -confs))
                tp_all = tp_all[:, order]
                ig_all = ig_all[:, order]
                for t_idx in range(num_t):
                    counted = ~ig_all[t_idx]
                    tps = tp_all[t_idx][counted]
                    if tps.size == 0:
                        ap[t_idx, k_idx, a_idx, m_idx] = 0.0
                        ar[t_idx, k_idx, a_idx, m_idx] = 0.0
                        continue
                    tp_cum = np.cumsum(tps)
                    fp_cum = np.cumsum(~tps)
                    rc = tp_cum / num_gt
                    pr = tp_cum / (tp_cum + fp_cum)
                    envelope = np.maximum.accumulate(pr[::-1])[::-1]
                    indices = np.searchsorted(rc, RECALL_GRID, side="left")
                    sampled = np.zeros(RECALL_GRID.size, dtype=np.float64)
                    valid = indices < rc.size
                    sampled[valid] = envelope[indices[valid]]
                    ap[t_idx, k_idx, a_idx, m_idx] = sampled.mean()
                    ar[t_idx, k_idx, a_idx, m_idx] = rc[-1]

    def cell_mean(values: np.ndarray) -> float:
        included = values[values > -1.0]
        return float(included.mean()) if included.size else -1.0

    def t_indices(target: float) -> list[int]:
        return [i for i, t in enumerate(thresholds) if abs(t - target) < 1e-9]

    full_label = _threshold_label(thresholds)
    a_of = {name: i for i, name in enumerate(AREA_NAMES)}
    last_m = num_m - 1
    rows = [
        ReportRow("mAP", full_label, "all", caps[-1], cell_mean(ap[:, :, a_of["all"], last_m]))
    ]
    for target in (0.5, 0.75):
        sel = t_indices(target)
        value = cell_mean(ap[sel, :, a_of["all"], last_m]) if sel else -1.0
        rows.append(ReportRow("mAP", f"{target:.2f}", "all", caps[-1], value))
    for name in ("small", "medium", "large"):
        rows.append(
            ReportRow("mAP", full_label, name, caps[-1], cell_mean(ap[:, :, a_of[name], last_m]))
        )
    for m_idx, cap in enumerate(caps):
        rows.append(ReportRow("mAR", full_label, "all", cap, cell_mean(ar[:, :, a_of["all"], m_idx])))
    for name in ("small", "medium", "large"):
        rows.append(
            ReportRow("mAR", full_label, name, caps[-1], cell_mean(ar[:, :, a_of[name], last_m]))
        )

    per_class_ap = None
    if per_class:
        per_class_ap = {
            class_id: cell_mean(ap[:, k_idx, a_of["all"], last_m])
            for k_idx, class_id in enumerate(class_ids)
        }
    return EvalReport(rows=tuple(rows), per_class_ap=per_class_ap)
