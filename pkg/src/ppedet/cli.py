"""Command-line interface binding the toolkit into reproducible pipelines.

Exit codes: 0 on success, 1 on usage errors, 2 on input or parse errors.
Every failure prints a single diagnostic line to stderr.  All randomness
comes from explicit ``--seed`` flags, so identical invocations produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .augment import AugmentKind, AugmentOp, apply_augment, read_image, write_image
from .config import EvalSettings, load_config
from .dataset import (
    AnnotationRecord,
    ClassTable,
    SplitSpec,
    class_stats,
    parse_annotation_file,
    parse_annotations,
    split,
    upsample_by_repetition,
    write_annotations,
)
from .detfiles import (
    format_detection_line,
    read_detection_dir,
    read_detections,
    read_dims_index,
    write_detections,
)
from .evaluation import full_report
from .nms import nms_classwise
from .ssd import SsdRawOutput, decode_ssd, generate_default_boxes
from .tensors import read_tensor
from .yolo import decode_yolo


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # route argparse failures through our exit-code contract instead of
    # its built-in SystemExit(2)
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.prog}: {message}")


def _emit_detections(detections, out_path: str | None) -> None:
    if out_path is None:
        for det in detections:
            print(format_detection_line(det))
    else:
        write_detections(out_path, detections)


def _cmd_decode_yolo(args: argparse.Namespace) -> int:
    cfg = load_config(args.spec)
    if cfg.yolo is None:
        raise ValueError(f"{args.spec} has no [yolo] section")
    head = read_tensor(args.head)
    _emit_detections(decode_yolo(head, cfg.yolo, args.conf), args.out)
    return 0


def _cmd_decode_ssd(args: argparse.Namespace) -> int:
    cfg = load_config(args.spec)
    if cfg.ssd is None:
        raise ValueError(f"{args.spec} has no [ssd] section")
    raw = SsdRawOutput.from_tensors(read_tensor(args.loc), read_tensor(args.scores))
    defaults = generate_default_boxes(cfg.ssd)
    _emit_detections(decode_ssd(raw, defaults, cfg.ssd, args.conf), args.out)
    return 0


def _cmd_nms(args: argparse.Namespace) -> int:
    detections = read_detections(args.infile)
    _emit_detections(nms_classwise(detections, args.iou), args.out)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    settings = load_config(args.config).eval_settings if args.config else EvalSettings()
    gts = {r.image_id: list(r.boxes) for r in parse_annotations(args.gt)}
    dets = read_detection_dir(args.pred)
    dims = read_dims_index(args.dims)
    report = full_report(dets, gts, settings.to_eval_config(dims))
    print(report.to_text())
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n", encoding="ascii")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    table = ClassTable.from_file(args.classes)
    records = parse_annotations(args.annotations, table)
    stats = class_stats(records, num_classes=len(table))
    print(f"{'class':<8}{'name':<16}{'count':>8}")
    for class_id, count in stats.counts.items():
        print(f"{class_id:<8}{table.name_of(class_id):<16}{count:>8}")
    print(f"{'total':<24}{stats.total:>8}")
    return 0


def _cmd_split(args: argparse.Namespace) -> int:
    records = parse_annotations(args.annotations)
    spec = SplitSpec(args.train, args.val, args.test, args.seed)
    parts = split(records, spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "val", "test"), parts):
        path = out_dir / f"{name}.txt"
        path.write_text("".join(f"{r.image_id}\n" for r in part), encoding="ascii")
        print(f"{name} {len(part)}")
    return 0


def _cmd_upsample(args: argparse.Namespace) -> int:
    table = ClassTable.from_file(args.classes) if args.classes else ClassTable()
    records = parse_annotations(args.annotations, table)
    if args.target_class.isdigit():
        class_id = int(args.target_class)
        table.name_of(class_id)  # bound check
    else:
        class_id = table.id_of(args.target_class)
    result = upsample_by_repetition(records, class_id, args.target, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_annotations(out_dir, result)
    stats = class_stats(result)
    print(f"images {len(result)} class {class_id} objects {stats.counts.get(class_id, 0)}")
    return 0


def _cmd_augment(args: argparse.Namespace) -> int:
    kind = AugmentKind(args.op)
    images_dir = Path(args.images)
    if not images_dir.is_dir():
        raise ValueError(f"not a directory: {images_dir}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(p for p in images_dir.iterdir() if p.suffix in (".ppm", ".pgm"))
    out_records = []
    for index, path in enumerate(paths):
        image = read_image(path)
        boxes = []
        if args.annotations:
            ann_path = Path(args.annotations) / f"{path.stem}.txt"
            if ann_path.exists():
                boxes = list(parse_annotation_file(ann_path, classes=None).boxes)
        # each image draws from its own offset seed so noise is independent
        # across files yet still fully determined by --seed
        op = AugmentOp(kind, sigma=args.sigma, seed=args.seed + index, clockwise=not args.ccw)
        out_image, out_boxes = apply_augment(image, boxes, op)
        suffix = ".pgm" if out_image.channels == 1 else ".ppm"
        write_image(out_dir / (path.stem + suffix), out_image)
        if args.annotations:
            out_records.append(AnnotationRecord(path.stem, tuple(out_boxes)))
        print(path.stem)
    write_annotations(out_dir, out_records)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ppedet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    decode = sub.add_parser("decode", help="decode raw head tensors into detections")
    decode_sub = decode.add_subparsers(dest="decoder", required=True)

    dy = decode_sub.add_parser("yolo", help="decode a grid-and-anchor head tensor")
    dy.add_argument("--head", required=True, help="head tensor file (TNSR)")
    dy.add_argument("--spec", required=True, help="toolkit config with a [yolo] section")
    dy.add_argument("--conf", type=float, required=True, help="confidence threshold")
    dy.add_argument("--out", help="detection file (default: stdout)")
    dy.set_defaults(func=_cmd_decode_yolo)

    ds = decode_sub.add_parser("ssd", help="decode default-box offsets and class scores")
    ds.add_argument("--loc", required=True, help="location offsets tensor file (TNSR)")
    ds.add_argument("--scores", required=True, help="class scores tensor file (TNSR)")
    ds.add_argument("--spec", required=True, help="toolkit config with an [ssd] section")
    ds.add_argument("--conf", type=float, required=True, help="confidence threshold")
    ds.add_argument("--out", help="detection file (default: stdout)")
    ds.set_defaults(func=_cmd_decode_ssd)

    nms = sub.add_parser("nms", help="suppress overlapping same-class detections")
    nms.add_argument("--in", dest="infile", required=True, help="detection file")
    nms.add_argument("--iou", type=float, required=True, help="suppression threshold")
    nms.add_argument("--out", help="detection file (default: stdout)")
    nms.set_defaults(func=_cmd_nms)

    ev = sub.add_parser("eval", help="score predictions against ground truth")
    ev.add_argument("--gt", required=True, help="ground-truth annotation directory")
    ev.add_argument("--pred", required=True, help="prediction directory")
    ev.add_argument("--dims", required=True, help="image dimension index file")
    ev.add_argument("--config", help="toolkit config with an [eval] section")
    ev.add_argument("--json", help="also write the report as JSON to this path")
    ev.set_defaults(func=_cmd_eval)

    st = sub.add_parser("stats", help="per-class object counts")
    st.add_argument("--annotations", required=True, help="annotation directory")
    st.add_argument("--classes", required=True, help="class table file, one name per line")
    st.set_defaults(func=_cmd_stats)

    sp = sub.add_parser("split", help="deterministic train/val/test split")
    sp.add_argument("--annotations", required=True, help="annotation directory")
    sp.add_argument("--train", type=int, required=True)
    sp.add_argument("--val", type=int, required=True)
    sp.add_argument("--test", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", default=".", help="directory for the three list files")
    sp.set_defaults(func=_cmd_split)

    up = sub.add_parser("upsample", help="duplicate images to balance a class")
    up.add_argument("--class", dest="target_class", required=True, help="class name or id")
    up.add_argument("--target", type=int, required=True, help="object count to reach")
    up.add_argument("--seed", type=int, required=True)
    up.add_argument("--annotations", required=True, help="annotation directory")
    up.add_argument("--out", required=True, help="output annotation directory")
    up.add_argument("--classes", help="class table file (default: built-in names)")
    up.set_defaults(func=_cmd_upsample)

    au = sub.add_parser("augment", help="transform an image corpus")
    au.add_argument(
        "--op", required=True, choices=[k.value for k in AugmentKind], help="augmentation"
    )
    au.add_argument("--sigma", type=float, default=0.0, help="noise standard deviation")
    au.add_argument("--seed", type=int, default=0)
    au.add_argument("--ccw", action="store_true", help="rotate counterclockwise")
    au.add_argument("--images", required=True, help="image directory (.ppm / .pgm)")
    au.add_argument("--out", required=True, help="output directory")
    au.add_argument("--annotations", help="co-transform boxes from this directory")
    au.set_defaults(func=_cmd_augment)

    sv = sub.add_parser("serve", help="run the HTTP service")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    sv.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc).replace("\n", " "), file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}".replace("\n", " "), file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
