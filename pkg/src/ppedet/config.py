"""Toolkit configuration file: one INI-style document holding the decoder
geometry, class names, evaluation grid, and NMS threshold.

Keeping these in a file rather than command-line flags makes runs
reproducible from the config plus a handful of explicit arguments.  Every
section is optional; omitted sections fall back to the shipped defaults.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from .dataset import ClassTable
from .evaluation import EvalConfig, default_iou_thresholds
from .ssd import DefaultBoxSpec
from .yolo import YoloHeadSpec

# threshold for duplicate suppression; a conventional value, not a tuned one
DEFAULT_NMS_IOU = 0.45

_SECTIONS = {"yolo", "ssd", "classes", "eval", "nms"}
_SECTION_KEYS = {
    "yolo": {"grid_size", "num_anchors", "num_classes", "anchors"},
    "ssd": {"feature_maps", "scales", "aspect_ratios", "variances", "extra_box"},
    "classes": {"names"},
    "eval": {"iou_thresholds", "max_dets", "small_max", "medium_max"},
    "nms": {"iou"},
}


@dataclass(frozen=True)
class EvalSettings:
    """The evaluation grid minus per-image dimensions, which come from the
    dimensions index at run time."""

    iou_thresholds: tuple[float, ...] = field(default_factory=default_iou_thresholds)
    max_dets: tuple[int, ...] = (1, 10, 100)
    small_max: float = 1024.0
    medium_max: float = 9216.0

    def __post_init__(self) -> None:
        if not 0.0 < self.small_max < self.medium_max:
            raise ValueError(
                f"area boundaries must satisfy 0 < small_max < medium_max, "
                f"got {self.small_max} and {self.medium_max}"
            )

    def area_ranges(self) -> dict[str, tuple[float, float]]:
        return {
            "all": (0.0, math.inf),
            "small": (0.0, self.small_max),
            "medium": (self.small_max, self.medium_max),
            "large": (self.medium_max, math.inf),
        }

    def to_eval_config(self, image_dims: Mapping[str, tuple[int, int]]) -> EvalConfig:
        return EvalConfig(
            iou_thresholds=self.iou_thresholds,
            area_ranges=self.area_ranges(),
            max_dets=self.max_dets,
            image_dims=image_dims,
        )


@dataclass(frozen=True)
class ToolkitConfig:
    yolo: YoloHeadSpec | None = None
    ssd: DefaultBoxSpec | None = None
    classes: ClassTable = field(default_factory=ClassTable)
    eval_settings: EvalSettings = field(default_factory=EvalSettings)
    nms_iou: float = DEFAULT_NMS_IOU

    def __post_init__(self) -> None:
        if not 0.0 < self.nms_iou <= 1.0:
            raise ValueError(f"nms iou must be in (0, 1], got {self.nms_iou}")


def _split_list(raw: str) -> list[str]:
    items = [part.strip() for part in raw.split(",")]
    if any(not part for part in items):
        raise ValueError(f"empty entry in list {raw!r}")
    return items


def _parse_floats(raw: str) -> tuple[float, ...]:
    return tuple(float(part) for part in _split_list(raw))


def _parse_ints(raw: str) -> tuple[int, ...]:
    return tuple(int(part) for part in _split_list(raw))


def _parse_ratio(raw: str) -> float:
    # aspect ratios may be written as fractions, e.g. 1/3
    return float(Fraction(raw))


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_anchors(raw: str) -> tuple[tuple[float, float], ...]:
    anchors = []
    for part in _split_list(raw):
        pieces = part.split("x")
        if len(pieces) != 2:
            raise ValueError(f"anchor {part!r} is not of the form WxH")
        anchors.append((float(pieces[0]), float(pieces[1])))
    return tuple(anchors)


def _require(section: Mapping[str, str], key: str, section_name: str) -> str:
    if key not in section:
        raise ValueError(f"[{section_name}] is missing required key {key!r}")
    return section[key]


def _yolo_from_section(section: Mapping[str, str]) -> YoloHeadSpec:
    return YoloHeadSpec(
        grid_size=int(_require(section, "grid_size", "yolo")),
        num_anchors=int(_require(section, "num_anchors", "yolo")),
        num_classes=int(_require(section, "num_classes", "yolo")),
        anchors=_parse_anchors(_require(section, "anchors", "yolo")),
    )


def _ssd_from_section(section: Mapping[str, str]) -> DefaultBoxSpec:
    ratios = tuple(
        tuple(_parse_ratio(r) for r in _split_list(layer))
        for layer in _require(section, "aspect_ratios", "ssd").split("|")
    )
    kwargs = {}
    if "variances" in section:
        variances = _parse_floats(section["variances"])
        if len(variances) != 4:
            raise ValueError(f"variances must list 4 values, got {len(variances)}")
        kwargs["variances"] = variances
    if "extra_box" in section:
        kwargs["include_extra_box"] = _parse_bool(section["extra_box"])
    return DefaultBoxSpec(
        feature_map_sizes=_parse_ints(_require(section, "feature_maps", "ssd")),
        scales=_parse_floats(_require(section, "scales", "ssd")),
        aspect_ratios=ratios,
        **kwargs,
    )


def _eval_from_section(section: Mapping[str, str]) -> EvalSettings:
    kwargs = {}
    if "iou_thresholds" in section:
        kwargs["iou_thresholds"] = _parse_floats(section["iou_thresholds"])
    if "max_dets" in section:
        kwargs["max_dets"] = _parse_ints(section["max_dets"])
    if "small_max" in section:
        kwargs["small_max"] = float(section["small_max"])
    if "medium_max" in section:
        kwargs["medium_max"] = float(section["medium_max"])
    return EvalSettings(**kwargs)


def parse_config(text: str, source: str = "<config>") -> ToolkitConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ValueError(f"{source}: {exc}") from None

    try:
        for name in parser.sections():
            if name not in _SECTIONS:
                raise ValueError(f"unknown section [{name}]")
            for key in parser[name]:
                if key not in _SECTION_KEYS[name]:
                    raise ValueError(f"unknown key {key!r} in section [{name}]")

        kwargs = {}
        if parser.has_section("yolo"):
            kwargs["yolo"] = _yolo_from_section(parser["yolo"])
        if parser.has_section("ssd"):
            kwargs["ssd"] = _ssd_from_section(parser["ssd"])
        if parser.has_section("classes"):
            names = _split_list(_require(parser["classes"], "names", "classes"))
            kwargs["classes"] = ClassTable(tuple(names))
        if parser.has_section("eval"):
            kwargs["eval_settings"] = _eval_from_section(parser["eval"])
        if parser.has_section("nms"):
            kwargs["nms_iou"] = float(_require(parser["nms"], "iou", "nms"))
        return ToolkitConfig(**kwargs)
    except ValueError as exc:
        raise ValueError(f"{source}: {exc}") from None


def load_config(path: str | Path) -> ToolkitConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))
