"""Text file I/O for detections and image-dimension indexes.

Detection files carry one detection per line:

    class_id confidence x_center y_center width height

with normalized decimal coordinates.  A directory of ``<image_id>.txt``
files maps to a per-image detection dict.  The dimension index carries one
``image_id width height`` line per image.  Floats are written with ``repr``
so a write/read cycle reproduces values bit for bit.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

from .geometry import BBox, Detection


def format_float(value: float) -> str:
    """Shortest decimal string that parses back to the same float."""
    return repr(float(value))


def parse_detection_line(line: str, source: str, line_no: int) -> Detection:
    fields = line.split()
    if len(fields) != 6:
        raise ValueError(
            f"{source}:{line_no}: expected 6 fields "
            f"(class_id confidence x_center y_center width height), got {len(fields)}"
        )
    try:
        class_id = int(fields[0])
    except ValueError:
        raise ValueError(f"{source}:{line_no}: class id {fields[0]!r} is not an integer") from None
    try:
        values = [float(f) for f in fields[1:]]
    except ValueError:
        raise ValueError(f"{source}:{line_no}: non-numeric field in {fields[1:]}") from None
    try:
        return Detection(class_id, values[0], BBox(*values[1:]))
    except ValueError as exc:
        raise ValueError(f"{source}:{line_no}: {exc}") from None


def read_detections(path: str | Path) -> list[Detection]:
    path = Path(path)
    detections = []
    with open(path, "r", encoding="ascii") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            detections.append(parse_detection_line(line, str(path), line_no))
    return detections


def format_detection_line(d: Detection) -> str:
    b = d.bbox
    coords = " ".join(
        format_float(v) for v in (d.confidence, b.x_center, b.y_center, b.width, b.height)
    )
    return f"{d.class_id} {coords}"


def write_detections(path: str | Path, detections: Sequence[Detection]) -> None:
    lines = [format_detection_line(d) + "\n" for d in detections]
    Path(path).write_text("".join(lines), encoding="ascii")


def read_detection_dir(directory: str | Path) -> dict[str, list[Detection]]:
    """All ``*.txt`` files in the directory, keyed by file stem (image id)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ValueError(f"not a directory: {directory}")
    return {path.stem: read_detections(path) for path in sorted(directory.glob("*.txt"))}


def write_detection_dir(
    directory: str | Path, dets_by_image: Mapping[str, Sequence[Detection]]
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for image_id, dets in dets_by_image.items():
        write_detections(directory / f"{image_id}.txt", dets)


def read_dims_index(path: str | Path) -> dict[str, tuple[int, int]]:
    """Lines of ``image_id width height``; duplicate ids are rejected."""
    path = Path(path)
    dims: dict[str, tuple[int, int]] = {}
    with open(path, "r", encoding="ascii") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 3:
                raise ValueError(
                    f"{path}:{line_no}: expected 3 fields (image_id width height), "
                    f"got {len(fields)}"
                )
            image_id = fields[0]
            try:
                width, height = int(fields[1]), int(fields[2])
            except ValueError:
                raise ValueError(f"{path}:{line_no}: non-integer dimensions {fields[1:]}") from None
            if width < 1 or height < 1:
                raise ValueError(f"{path}:{line_no}: dimensions must be positive, got {fields[1:]}")
            if image_id in dims:
                raise ValueError(f"{path}:{line_no}: duplicate image id {image_id!r}")
            dims[image_id] = (width, height)
    return dims


def write_dims_index(path: str | Path, dims: Mapping[str, tuple[int, int]]) -> None:
    lines = [f"{image_id} {w} {h}\n" for image_id, (w, h) in sorted(dims.items())]
    Path(path).write_text("".join(lines), encoding="ascii")
