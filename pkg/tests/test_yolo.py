import random

import numpy as np
import pytest

from ppedet.geometry import BBox
from ppedet.tensors import Tensor
from ppedet.yolo import YoloHeadSpec, decode_yolo, head_depth

from encoders import encode_yolo


ANCHORS3 = ((0.1, 0.15), (0.25, 0.2), (0.4, 0.45))


class TestHeadDepth:
    def test_five_classes_three_anchors(self):
        spec = YoloHeadSpec(13, 3, 5, ANCHORS3)
        assert head_depth(spec) == 30

    def test_smallest_head(self):
        spec = YoloHeadSpec(1, 1, 1, ((0.5, 0.5),))
        assert head_depth(spec) == 6

    def test_eighty_classes(self):
        spec = YoloHeadSpec(2, 3, 80, ANCHORS3)
        assert head_depth(spec) == 255
        rng = np.random.default_rng(40)
        head = Tensor((2, 2, 255), rng.normal(size=2 * 2 * 255).astype(np.float32))
        dets = decode_yolo(head, spec, 0.0)
        assert len(dets) == 2 * 2 * 3
        assert all(0 <= d.class_id < 80 for d in dets)


class TestDecode:
    def test_zero_objectness_gives_empty_list(self):
        spec = YoloHeadSpec(3, 2, 4, ANCHORS3[:2])
        rng = np.random.default_rng(41)
        arr = rng.normal(size=(3, 3, head_depth(spec))).astype(np.float32)
        block = 4 + 1 + 4
        for b in range(2):
            arr[:, :, b * block + 4] = -1e4
        dets = decode_yolo(Tensor((3, 3, block * 2), arr.reshape(-1)), spec, 1e-9)
        assert dets == []

    def test_single_cell_fixed_points(self):
        spec = YoloHeadSpec(1, 1, 1, ((0.5, 0.5),))
        arr = np.array([0.0, 0.0, 0.0, 0.0, 20.0, 20.0], dtype=np.float32)
        (det,) = decode_yolo(Tensor((1, 1, 6), arr), spec, 0.5)
        assert det.bbox == BBox(0.5, 0.5, 0.5, 0.5)
        assert det.confidence > 0.999
        assert det.class_id == 0

    def test_round_trip_recovers_boxes(self):
        rng = random.Random(42)
        spec = YoloHeadSpec(7, 3, 5, ANCHORS3)
        slots = [(cy, cx, b) for cy in range(7) for cx in range(7) for b in range(3)]
        assignments = []
        for cy, cx, b in rng.sample(slots, 20):
            anchor_w, anchor_h = spec.anchors[b]
            bbox = BBox(
                x_center=(cx + rng.uniform(0.2, 0.8)) / 7,
                y_center=(cy + rng.uniform(0.2, 0.8)) / 7,
                width=anchor_w * rng.uniform(0.6, 1.6),
                height=anchor_h * rng.uniform(0.6, 1.6),
            )
            assignments.append((cy, cx, b, rng.randrange(5), rng.uniform(0.3, 0.9), bbox))
        head = encode_yolo(assignments, spec)
        dets = decode_yolo(head, spec, 0.25)
        assert len(dets) == len(assignments)
        # decode emits row-major cell then anchor, same as sorted assignments
        for (cy, cx, b, k, conf, bbox), det in zip(sorted(assignments), dets):
            assert det.class_id == k
            assert det.confidence == pytest.approx(conf, abs=1e-4)
            assert det.bbox.x_center == pytest.approx(bbox.x_center, abs=1e-5)
            assert det.bbox.y_center == pytest.approx(bbox.y_center, abs=1e-5)
            assert det.bbox.width == pytest.approx(bbox.width, abs=1e-5)
            assert det.bbox.height == pytest.approx(bbox.height, abs=1e-5)

    def test_centers_stay_inside_their_cell(self):
        spec = YoloHeadSpec(5, 2, 3, ANCHORS3[:2])
        rng = np.random.default_rng(43)
        head = Tensor(
            (5, 5, head_depth(spec)),
            rng.normal(scale=3.0, size=5 * 5 * head_depth(spec)).astype(np.float32),
        )
        dets = decode_yolo(head, spec, 0.0)
        assert len(dets) == 5 * 5 * 2
        for i, det in enumerate(dets):
            cell, b = divmod(i, 2)
            cy, cx = divmod(cell, 5)
            assert cx / 5 < det.bbox.x_center < (cx + 1) / 5
            assert cy / 5 < det.bbox.y_center < (cy + 1) / 5

    def test_confidence_monotone_in_objectness(self):
        spec = YoloHeadSpec(1, 1, 2, ((0.3, 0.3),))
        prev = -1.0
        for t_obj in (-4.0, -1.0, 0.0, 1.5, 4.0):
            arr = np.array([0.1, -0.2, 0.0, 0.0, t_obj, 1.0, -1.0], dtype=np.float32)
            (det,) = decode_yolo(Tensor((1, 1, 7), arr), spec, 0.0)
            assert det.confidence > prev
            assert 0.0 < det.confidence < 1.0
            prev = det.confidence

    def test_oversized_boxes_are_capped(self):
        spec = YoloHeadSpec(1, 1, 1, ((0.5, 0.5),))
        arr = np.array([0.0, 0.0, 30.0, 200.0, 5.0, 5.0], dtype=np.float32)
        (det,) = decode_yolo(Tensor((1, 1, 6), arr), spec, 0.0)
        assert det.bbox.width == 1.0 and det.bbox.height == 1.0

    def test_dimension_mismatch_error(self):
        spec = YoloHeadSpec(4, 3, 5, ANCHORS3)
        bad = Tensor((4, 4, 29), np.zeros(4 * 4 * 29, np.float32))
        with pytest.raises(ValueError, match="dims"):
            decode_yolo(bad, spec, 0.5)

    def test_threshold_validation(self):
        spec = YoloHeadSpec(1, 1, 1, ((0.5, 0.5),))
        head = Tensor((1, 1, 6), np.zeros(6, np.float32))
        with pytest.raises(ValueError, match="threshold"):
            decode_yolo(head, spec, 1.5)


class TestSpecValidation:
    def test_anchor_count_must_match(self):
        with pytest.raises(ValueError, match="anchors"):
            YoloHeadSpec(13, 3, 5, ((0.1, 0.1),))

    def test_anchor_extents_positive(self):
        with pytest.raises(ValueError, match="positive"):
            YoloHeadSpec(13, 1, 5, ((0.1, 0.0),))
