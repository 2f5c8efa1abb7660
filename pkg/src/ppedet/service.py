"""HTTP service exposing the toolkit: decoding, NMS, IOU, evaluation, and
corpus statistics.

Request and response bodies are JSON; raw head tensors travel as base64
strings of the binary tensor format.  Domain validation failures map to
HTTP 400 with the underlying message.
"""

from __future__ import annotations

import base64
import binascii
from typing import Annotated

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .config import DEFAULT_NMS_IOU, EvalSettings
from .dataset import AnnotationRecord, class_stats
from .evaluation import full_report
from .geometry import BBox, Detection, GroundTruthBox, center_to_corner, iou
from .nms import nms_classwise
from .ssd import DefaultBoxSpec, SsdRawOutput, decode_ssd, generate_default_boxes
from .tensors import tensor_from_bytes
from .yolo import YoloHeadSpec, decode_yolo

app = FastAPI(
    title="PPE detection toolkit",
    description="Detector head decoding, NMS, and COCO-style evaluation "
    "for the five-class mask/glove task.",
    version=__version__,
)


@app.exception_handler(ValueError)
async def _value_error_handler(request: Request, exc: ValueError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


class BoxModel(BaseModel):
    x_center: float
    y_center: float
    width: float
    height: float

    def to_bbox(self) -> BBox:
        return BBox(self.x_center, self.y_center, self.width, self.height)

    @classmethod
    def from_bbox(cls, b: BBox) -> "BoxModel":
        return cls(x_center=b.x_center, y_center=b.y_center, width=b.width, height=b.height)


class DetectionModel(BaseModel):
    class_id: int
    confidence: float
    bbox: BoxModel

    def to_detection(self) -> Detection:
        return Detection(self.class_id, self.confidence, self.bbox.to_bbox())

    @classmethod
    def from_detection(cls, d: Detection) -> "DetectionModel":
        return cls(class_id=d.class_id, confidence=d.confidence, bbox=BoxModel.from_bbox(d.bbox))


class GroundTruthModel(BaseModel):
    class_id: int
    bbox: BoxModel


class IouRequest(BaseModel):
    box_a: BoxModel
    box_b: BoxModel


class IouResponse(BaseModel):
    iou: float


class NmsRequest(BaseModel):
    detections: list[DetectionModel]
    iou_threshold: float = DEFAULT_NMS_IOU


class DetectionsResponse(BaseModel):
    detections: list[DetectionModel]


class YoloSpecModel(BaseModel):
    grid_size: int
    num_anchors: int
    num_classes: int
    anchors: list[tuple[float, float]]

    def to_spec(self) -> YoloHeadSpec:
        return YoloHeadSpec(
            self.grid_size, self.num_anchors, self.num_classes, tuple(self.anchors)
        )


class SsdSpecModel(BaseModel):
    feature_maps: list[int]
    scales: list[float]
    aspect_ratios: list[list[float]]
    variances: tuple[float, float, float, float] = (0.1, 0.1, 0.2, 0.2)
    extra_box: bool = True

    def to_spec(self) -> DefaultBoxSpec:
        return DefaultBoxSpec(
            feature_map_sizes=tuple(self.feature_maps),
            scales=tuple(self.scales),
            aspect_ratios=tuple(tuple(layer) for layer in self.aspect_ratios),
            variances=self.variances,
            include_extra_box=self.extra_box,
        )


def _decode_tensor_field(payload: str, field_name: str):
    try:
        blob = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError):
        raise ValueError(f"{field_name} is not valid base64") from None
    return tensor_from_bytes(blob, source=field_name)


class YoloDecodeRequest(BaseModel):
    head: str = Field(description="base64 of the binary tensor format")
    spec: YoloSpecModel
    conf_threshold: Annotated[float, Field(ge=0.0, le=1.0)]


class SsdDecodeRequest(BaseModel):
    loc: str = Field(description="base64 of the binary tensor format")
    scores: str = Field(description="base64 of the binary tensor format")
    spec: SsdSpecModel
    conf_threshold: Annotated[float, Field(ge=0.0, le=1.0)]


class EvalSettingsModel(BaseModel):
    iou_thresholds: list[float] | None = None
    max_dets: list[int] | None = None
    small_max: float = 1024.0
    medium_max: float = 9216.0

    def to_settings(self) -> EvalSettings:
        kwargs = {"small_max": self.small_max, "medium_max": self.medium_max}
        if self.iou_thresholds is not None:
            kwargs["iou_thresholds"] = tuple(self.iou_thresholds)
        if self.max_dets is not None:
            kwargs["max_dets"] = tuple(self.max_dets)
        return EvalSettings(**kwargs)


class EvalRequest(BaseModel):
    detections: dict[str, list[DetectionModel]]
    ground_truths: dict[str, list[GroundTruthModel]]
    image_dims: dict[str, tuple[int, int]]
    settings: EvalSettingsModel | None = None


class ReportRowModel(BaseModel):
    metric: str
    iou: str
    area: str
    max_dets: int
    value: float


class EvalResponse(BaseModel):
    rows: list[ReportRowModel]
    text: str


class StatsRequest(BaseModel):
    ground_truths: dict[str, list[GroundTruthModel]]
    num_classes: int | None = None


class StatsResponse(BaseModel):
    counts: dict[int, int]
    total: int


@app.get("/health")
def health() -> dict[str, str]:
    return {"status": "ok", "version": __version__}


@app.post("/geometry/iou")
def geometry_iou(req: IouRequest) -> IouResponse:
    a = center_to_corner(req.box_a.to_bbox())
    b = center_to_corner(req.box_b.to_bbox())
    return IouResponse(iou=iou(a, b))


@app.post("/nms")
def run_nms(req: NmsRequest) -> DetectionsResponse:
    kept = nms_classwise([d.to_detection() for d in req.detections], req.iou_threshold)
    return DetectionsResponse(detections=[DetectionModel.from_detection(d) for d in kept])


@app.post("/decode/yolo")
def run_decode_yolo(req: YoloDecodeRequest) -> DetectionsResponse:
    head = _decode_tensor_field(req.head, "head")
    dets = decode_yolo(head, req.spec.to_spec(), req.conf_threshold)
    return DetectionsResponse(detections=[DetectionModel.from_detection(d) for d in dets])


@app.post("/decode/ssd")
def run_decode_ssd(req: SsdDecodeRequest) -> DetectionsResponse:
    raw = SsdRawOutput.from_tensors(
        _decode_tensor_field(req.loc, "loc"), _decode_tensor_field(req.scores, "scores")
    )
    spec = req.spec.to_spec()
    dets = decode_ssd(raw, generate_default_boxes(spec), spec, req.conf_threshold)
    return DetectionsResponse(detections=[DetectionModel.from_detection(d) for d in dets])


@app.post("/eval")
def run_eval(req: EvalRequest) -> EvalResponse:
    settings = req.settings.to_settings() if req.settings else EvalSettings()
    dets = {
        image_id: [d.to_detection() for d in models]
        for image_id, models in req.detections.items()
    }
    gts = {
        image_id: [
            GroundTruthBox(g.class_id, g.bbox.to_bbox(), image_id) for g in models
        ]
        for image_id, models in req.ground_truths.items()
    }
    report = full_report(dets, gts, settings.to_eval_config(req.image_dims))
    rows = [
        ReportRowModel(
            metric=r.metric, iou=r.iou, area=r.area, max_dets=r.max_dets, value=r.value
        )
        for r in report.rows
    ]
    return EvalResponse(rows=rows, text=report.to_text())


@app.post("/dataset/stats")
def run_stats(req: StatsRequest) -> StatsResponse:
    records = [
        AnnotationRecord(
            image_id,
            tuple(GroundTruthBox(g.class_id, g.bbox.to_bbox(), image_id) for g in models),
        )
        for image_id, models in req.ground_truths.items()
    ]
    stats = class_stats(records, num_classes=req.num_classes)
    return StatsResponse(counts=dict(stats.counts), total=stats.total)
