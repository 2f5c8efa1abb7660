"""PPE detector post-processing and evaluation toolkit.

Decodes raw YOLO-style and SSD-style head tensors into detections, applies
class-wise non-maximum suppression, and produces COCO-style mAP/mAR reports,
with dataset and augmentation tooling for five-class mask/glove corpora.
"""

from ppedet.geometry import (
    BBox,
    CornerBox,
    Detection,
    GroundTruthBox,
    center_to_corner,
    corner_to_center,
    iou,
)

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "CornerBox",
    "Detection",
    "GroundTruthBox",
    "center_to_corner",
    "corner_to_center",
    "iou",
    "__version__",
]
