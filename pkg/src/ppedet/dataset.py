"""Annotation corpus management: parsing, class statistics, up-sampling by
repetition, and deterministic train/val/test splitting.

Annotation files use the Darknet text convention, one box per line:

    class_id x_center y_center width height

with normalized decimals.  A corpus is a directory of ``<image_id>.txt``
files; an empty file is a negative image.  All randomness is seeded.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .detfiles import format_float
from .geometry import BBox, GroundTruthBox

DEFAULT_CLASS_NAMES = ("Mask", "Improper", "No-mask", "Glove", "No-glove")


@dataclass(frozen=True)
class ClassTable:
    """Ordered class names; a class id is its 0-based position."""

    names: tuple[str, ...] = DEFAULT_CLASS_NAMES

    def __post_init__(self) -> None:
        names = tuple(str(n) for n in self.names)
        if not names:
            raise ValueError("class table must not be empty")
        for name in names:
            if not name or name.split() != [name]:
                raise ValueError(f"class names must be non-empty without whitespace: {name!r}")
        if len(set(names)) != len(names):
            raise ValueError(f"class names must be unique, got {names}")
        object.__setattr__(self, "names", names)

    def __len__(self) -> int:
        return len(self.names)

    def name_of(self, class_id: int) -> str:
        if not 0 <= class_id < len(self.names):
            raise ValueError(f"class id {class_id} out of range for {len(self.names)} classes")
        return self.names[class_id]

    def id_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"unknown class name {name!r}; known: {', '.join(self.names)}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "ClassTable":
        """One class name per line; line number minus one is the class id."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        names = [line.strip() for line in lines if line.strip()]
        return cls(tuple(names))

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text("".join(f"{n}\n" for n in self.names), encoding="utf-8")


@dataclass(frozen=True)
class AnnotationRecord:
    """One image's ground-truth boxes."""

    image_id: str
    boxes: tuple[GroundTruthBox, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "boxes", tuple(self.boxes))
        for box in self.boxes:
            if box.image_id != self.image_id:
                raise ValueError(
                    f"record {self.image_id!r} holds a box labeled {box.image_id!r}"
                )


def parse_annotation_line(
    line: str, source: str, line_no: int, image_id: str, classes: ClassTable | None
) -> GroundTruthBox:
    fields = line.split()
    if len(fields) != 5:
        raise ValueError(
            f"{source}:{line_no}: expected 5 fields "
            f"(class_id x_center y_center width height), got {len(fields)}"
        )
    try:
        class_id = int(fields[0])
    except ValueError:
        raise ValueError(f"{source}:{line_no}: class id {fields[0]!r} is not an integer") from None
    if classes is not None and not 0 <= class_id < len(classes):
        raise ValueError(
            f"{source}:{line_no}: class id {class_id} out of range for {len(classes)} classes"
        )
    try:
        values = [float(f) for f in fields[1:]]
    except ValueError:
        raise ValueError(f"{source}:{line_no}: non-numeric field in {fields[1:]}") from None
    try:
        return GroundTruthBox(class_id, BBox(*values), image_id)
    except ValueError as exc:
        raise ValueError(f"{source}:{line_no}: {exc}") from None


def parse_annotation_file(
    path: str | Path, classes: ClassTable | None, image_id: str | None = None
) -> AnnotationRecord:
    path = Path(path)
    if image_id is None:
        image_id = path.stem
    boxes = []
    with open(path, "r", encoding="ascii") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            boxes.append(parse_annotation_line(line, str(path), line_no, image_id, classes))
    return AnnotationRecord(image_id, tuple(boxes))


def parse_annotations(
    directory: str | Path, classes: ClassTable | None = None
) -> list[AnnotationRecord]:
    """Parse every ``*.txt`` file in the directory, in lexicographic order.

    With a class table, class ids are bound-checked against it; without
    one, any non-negative id is accepted.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ValueError(f"not a directory: {directory}")
    return [parse_annotation_file(path, classes) for path in sorted(directory.glob("*.txt"))]


def write_annotations(directory: str | Path, records: Iterable[AnnotationRecord]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for record in records:
        lines = []
        for box in record.boxes:
            b = box.bbox
            coords = " ".join(
                format_float(v) for v in (b.x_center, b.y_center, b.width, b.height)
            )
            lines.append(f"{box.class_id} {coords}\n")
        (directory / f"{record.image_id}.txt").write_text("".join(lines), encoding="ascii")


@dataclass(frozen=True)
class ClassStats:
    """Object counts per class id, plus their sum."""

    counts: Mapping[int, int]
    total: int


def class_stats(
    records: Iterable[AnnotationRecord], num_classes: int | None = None
) -> ClassStats:
    """Exact per-class object counts.  ``num_classes`` forces zero entries
    for classes that never occur."""
    counts: dict[int, int] = {k: 0 for k in range(num_classes or 0)}
    total = 0
    for record in records:
        for box in record.boxes:
            counts[box.class_id] = counts.get(box.class_id, 0) + 1
            total += 1
    return ClassStats(counts=dict(sorted(counts.items())), total=total)


def upsample_by_repetition(
    records: Sequence[AnnotationRecord], target_class: int, target_count: int, seed: int
) -> list[AnnotationRecord]:
    """Duplicate images containing the target class, round-robin over a
    seeded shuffle, until the class object count first reaches or exceeds
    ``target_count``.  Duplicates get ids ``<id>#dup<n>``."""
    current = sum(
        1 for record in records for box in record.boxes if box.class_id == target_class
    )
    if target_count <= current:
        return list(records)
    carriers = [
        record
        for record in records
        if any(box.class_id == target_class for box in record.boxes)
    ]
    if not carriers:
        raise ValueError(f"no image contains class {target_class}; cannot up-sample")

    rotation = list(carriers)
    random.Random(seed).shuffle(rotation)
    result = list(records)
    copies: dict[str, int] = {}
    count = current
    index = 0
    while count < target_count:
        source = rotation[index % len(rotation)]
        index += 1
        copies[source.image_id] = copies.get(source.image_id, 0) + 1
        new_id = f"{source.image_id}#dup{copies[source.image_id]}"
        boxes = tuple(
            GroundTruthBox(box.class_id, box.bbox, new_id) for box in source.boxes
        )
        result.append(AnnotationRecord(new_id, boxes))
        count += sum(1 for box in source.boxes if box.class_id == target_class)
    return result


@dataclass(frozen=True)
class SplitSpec:
    """Counts for the train/val/test partition and the shuffle seed."""

    train_count: int = 4250
    val_count: int = 2000
    test_count: int = 2000
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("train_count", "val_count", "test_count"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


def split(
    records: Sequence[AnnotationRecord], spec: SplitSpec
) -> tuple[list[AnnotationRecord], list[AnnotationRecord], list[AnnotationRecord]]:
    """Seeded shuffle, then contiguous partition into (train, val, test)."""
    expected = spec.train_count + spec.val_count + spec.test_count
    if expected != len(records):
        raise ValueError(
            f"split counts sum to {expected} but the corpus has {len(records)} records"
        )
    shuffled = list(records)
    random.Random(spec.seed).shuffle(shuffled)
    train = shuffled[: spec.train_count]
    val = shuffled[spec.train_count : spec.train_count + spec.val_count]
    test = shuffled[spec.train_count + spec.val_count :]
    return train, val, test


@dataclass(frozen=True)
class TrainingConfig:
    """Declared training hyperparameters; parsed and validated, never run."""

    optimizer: str
    learning_rate: float
    momentum: float
    epoch: int
    batch_size: int
    image_size: tuple[int, int]
    training_set: int | None = None

    def __post_init__(self) -> None:
        if not self.optimizer.strip():
            raise ValueError("optimizer must be non-empty")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epoch < 1:
            raise ValueError(f"epoch must be positive, got {self.epoch}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        w, h = self.image_size
        if w < 1 or h < 1:
            raise ValueError(f"image_size must be positive, got {self.image_size}")
        if self.training_set is not None and self.training_set < 1:
            raise ValueError(f"training_set must be positive, got {self.training_set}")


def _parse_image_size(text: str, source: str, line_no: int) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"{source}:{line_no}: image-size must look like 416x416, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise ValueError(f"{source}:{line_no}: non-integer image-size {text!r}") from None


def read_training_config(path: str | Path) -> TrainingConfig:
    """Key-value lines, one per hyperparameter, keys as printed in the
    usual parameter tables: optimizer, learning-rate, momentum, epoch,
    batch-size, image-size, and optionally training-set."""
    path = Path(path)
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            key, sep, value = text.partition("=")
            if not sep:
                raise ValueError(f"{path}:{line_no}: expected key = value, got {text!r}")
            key = key.strip().lower()
            if key in raw:
                raise ValueError(f"{path}:{line_no}: duplicate key {key!r}")
            raw[key] = value.strip()

    required = ("optimizer", "learning-rate", "momentum", "epoch", "batch-size", "image-size")
    known = set(required) | {"training-set"}
    for key in raw:
        if key not in known:
            raise ValueError(f"{path}: unknown key {key!r}; known keys: {', '.join(sorted(known))}")
    for key in required:
        if key not in raw:
            raise ValueError(f"{path}: missing required key {key!r}")

    try:
        learning_rate = float(raw["learning-rate"])
        momentum = float(raw["momentum"])
        epoch = int(raw["epoch"])
        batch_size = int(raw["batch-size"])
        training_set = int(raw["training-set"]) if "training-set" in raw else None
    except ValueError:
        raise ValueError(f"{path}: non-numeric hyperparameter value") from None
    image_size = _parse_image_size(raw["image-size"], str(path), 0)
    try:
        return TrainingConfig(
            optimizer=raw["optimizer"],
            learning_rate=learning_rate,
            momentum=momentum,
            epoch=epoch,
            batch_size=batch_size,
            image_size=image_size,
            training_set=training_set,
        )
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_training_config(path: str | Path, config: TrainingConfig) -> None:
    lines = [
        f"optimizer = {config.optimizer}\n",
        f"learning-rate = {format_float(config.learning_rate)}\n",
        f"momentum = {format_float(config.momentum)}\n",
        f"epoch = {config.epoch}\n",
    ]
    if config.training_set is not None:
        lines.append(f"training-set = {config.training_set}\n")
    lines.append(f"batch-size = {config.batch_size}\n")
    lines.append(f"image-size = {config.image_size[0]}x{config.image_size[1]}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")
