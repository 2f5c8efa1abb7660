"""Dataset tooling tests: class table, parsing, stats, upsampling, splits."""

import random

import pytest

from ppedet.dataset import (
    AnnotationRecord,
    ClassTable,
    SplitSpec,
    TrainingConfig,
    class_stats,
    parse_annotations,
    read_training_config,
    split,
    upsample_by_repetition,
    write_annotations,
    write_training_config,
)
from ppedet.geometry import BBox, GroundTruthBox

TABLE_COUNTS = (11455, 385, 8450, 3175, 11477)


def record(image_id, class_ids):
    box = BBox(0.5, 0.5, 0.25, 0.25)
    return AnnotationRecord(
        image_id, tuple(GroundTruthBox(k, box, image_id) for k in class_ids)
    )


def corpus_with_counts(counts, per_image=50):
    """Synthetic records reproducing exact per-class object counts."""
    records = []
    for class_id, count in enumerate(counts):
        remaining = count
        index = 0
        while remaining > 0:
            batch = min(per_image, remaining)
            records.append(record(f"c{class_id}_{index:04d}", [class_id] * batch))
            remaining -= batch
            index += 1
    return records


class TestClassTable:
    def test_default_five_classes(self):
        table = ClassTable()
        assert table.names == ("Mask", "Improper", "No-mask", "Glove", "No-glove")
        assert len(table) == 5
        assert table.id_of("Glove") == 3
        assert table.name_of(0) == "Mask"

    def test_unknown_name_and_id(self):
        table = ClassTable()
        with pytest.raises(ValueError, match="unknown class name"):
            table.id_of("Helmet")
        with pytest.raises(ValueError, match="out of range"):
            table.name_of(5)

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            ClassTable(("a", "b", "a"))

    def test_whitespace_names_rejected(self):
        with pytest.raises(ValueError, match="whitespace"):
            ClassTable(("a b",))

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "classes.txt"
        ClassTable().to_file(path)
        assert path.read_text().splitlines() == list(ClassTable().names)
        assert ClassTable.from_file(path) == ClassTable()


class TestParseAnnotations:
    def test_single_well_formed_line(self, tmp_path):
        (tmp_path / "a.txt").write_text("0 0.5 0.5 0.2 0.3\n")
        (rec,) = parse_annotations(tmp_path, ClassTable())
        assert rec.image_id == "a"
        (box,) = rec.boxes
        assert box.class_id == 0
        assert box.bbox == BBox(0.5, 0.5, 0.2, 0.3)
        assert box.image_id == "a"

    def test_empty_file_is_negative_image(self, tmp_path):
        (tmp_path / "bg.txt").write_text("")
        (rec,) = parse_annotations(tmp_path, ClassTable())
        assert rec.boxes == ()

    def test_class_out_of_range_names_line(self, tmp_path):
        (tmp_path / "a.txt").write_text("7 0.5 0.5 0.1 0.1\n")
        with pytest.raises(
            ValueError, match=r"a\.txt:1: class id 7 out of range for 5 classes"
        ):
            parse_annotations(tmp_path, ClassTable())

    def test_without_table_any_id_parses(self, tmp_path):
        (tmp_path / "a.txt").write_text("7 0.5 0.5 0.1 0.1\n")
        (rec,) = parse_annotations(tmp_path)
        assert rec.boxes[0].class_id == 7

    def test_field_count_error(self, tmp_path):
        (tmp_path / "a.txt").write_text("0 0.5 0.5 0.1\n")
        with pytest.raises(ValueError, match=r"a\.txt:1: expected 5 fields"):
            parse_annotations(tmp_path)

    def test_non_numeric_error(self, tmp_path):
        (tmp_path / "a.txt").write_text("0 0.5 x 0.1 0.1\n")
        with pytest.raises(ValueError, match=r"a\.txt:1: non-numeric"):
            parse_annotations(tmp_path)

    def test_box_invariant_error(self, tmp_path):
        (tmp_path / "a.txt").write_text("0 0.5 0.5 0.1 0.1\n0 1.5 0.5 0.1 0.1\n")
        with pytest.raises(ValueError, match=r"a\.txt:2: "):
            parse_annotations(tmp_path)

    def test_records_sorted_by_image_id(self, tmp_path):
        for name in ("c", "a", "b"):
            (tmp_path / f"{name}.txt").write_text("")
        assert [r.image_id for r in parse_annotations(tmp_path)] == ["a", "b", "c"]

    def test_missing_directory(self, tmp_path):
        with pytest.raises(ValueError, match="not a directory"):
            parse_annotations(tmp_path / "nope")

    def test_round_trip_identity(self, tmp_path):
        rng = random.Random(55)
        records = []
        for i in range(12):
            image_id = f"img_{i:02d}"
            boxes = []
            for _ in range(rng.randrange(4)):
                w = rng.uniform(0.05, 0.4)
                h = rng.uniform(0.05, 0.4)
                boxes.append(
                    GroundTruthBox(
                        rng.randrange(5),
                        BBox(
                            rng.uniform(w / 2, 1 - w / 2),
                            rng.uniform(h / 2, 1 - h / 2),
                            w,
                            h,
                        ),
                        image_id,
                    )
                )
            records.append(AnnotationRecord(image_id, tuple(boxes)))
        write_annotations(tmp_path / "ann", records)
        assert parse_annotations(tmp_path / "ann", ClassTable()) == records


class TestClassStats:
    def test_reference_counts_total(self):
        stats = class_stats(corpus_with_counts(TABLE_COUNTS), num_classes=5)
        assert stats.counts == dict(enumerate(TABLE_COUNTS))
        assert stats.total == 34942

    def test_empty_corpus(self):
        stats = class_stats([], num_classes=5)
        assert stats.counts == {k: 0 for k in range(5)}
        assert stats.total == 0

    def test_two_gloves(self):
        stats = class_stats([record("a", [3, 3])], num_classes=5)
        assert stats.counts[3] == 2
        assert stats.total == 2


class TestUpsample:
    def glove_corpus(self, rng):
        records = []
        for i in range(60):
            classes = [rng.randrange(5) for _ in range(rng.randint(1, 6))]
            records.append(record(f"img_{i:03d}", classes))
        return records

    def test_noop_when_target_met(self):
        records = [record("a", [3]), record("b", [0])]
        assert upsample_by_repetition(records, 3, 1, seed=1) == records

    def test_missing_class_errors(self):
        with pytest.raises(ValueError, match="no image contains class 3"):
            upsample_by_repetition([record("a", [0])], 3, 5, seed=1)

    def test_reaches_target_within_one_image(self):
        rng = random.Random(13)
        records = self.glove_corpus(rng)
        before = class_stats(records, num_classes=5)
        target = before.counts[3] * 4
        result = upsample_by_repetition(records, 3, target, seed=9)
        after = class_stats(result, num_classes=5)
        max_per_image = max(
            sum(1 for b in r.boxes if b.class_id == 3) for r in records
        )
        assert target <= after.counts[3] < target + max_per_image

    def test_duplicates_are_whole_images_with_derived_ids(self):
        records = [record("a", [3, 3]), record("b", [0])]
        result = upsample_by_repetition(records, 3, 6, seed=0)
        assert result[:2] == records
        extra = result[2:]
        assert [r.image_id for r in extra] == ["a#dup1", "a#dup2"]
        for dup in extra:
            assert [b.class_id for b in dup.boxes] == [3, 3]
            assert all(b.image_id == dup.image_id for b in dup.boxes)

    def test_other_classes_grow_only_by_cooccurrence(self):
        records = [record("a", [3, 1]), record("b", [0])]
        result = upsample_by_repetition(records, 3, 3, seed=0)
        after = class_stats(result, num_classes=5)
        # class 1 rides along on the duplicated image, class 0 does not
        assert after.counts == {0: 1, 1: 3, 2: 0, 3: 3, 4: 0}

    def test_deterministic_per_seed(self):
        rng = random.Random(21)
        records = self.glove_corpus(rng)
        target = class_stats(records, num_classes=5).counts[3] * 3
        first = upsample_by_repetition(records, 3, target, seed=4)
        second = upsample_by_repetition(records, 3, target, seed=4)
        assert first == second
        other = upsample_by_repetition(records, 3, target, seed=5)
        assert [r.image_id for r in other] != [r.image_id for r in first]


class TestSplit:
    def test_small_partition_exact(self):
        records = [record(f"r{i}", [0]) for i in range(10)]
        train, val, test = split(records, SplitSpec(5, 3, 2, seed=42))
        assert (len(train), len(val), len(test)) == (5, 3, 2)
        ids = [r.image_id for part in (train, val, test) for r in part]
        assert sorted(ids) == sorted(r.image_id for r in records)
        assert len(set(ids)) == len(ids)

    def test_deterministic(self):
        records = [record(f"r{i}", [0]) for i in range(10)]
        spec = SplitSpec(5, 3, 2, seed=7)
        assert split(records, spec) == split(records, spec)
        different = split(records, SplitSpec(5, 3, 2, seed=8))
        assert different != split(records, spec)

    def test_count_mismatch(self):
        records = [record(f"r{i}", [0]) for i in range(9)]
        with pytest.raises(ValueError, match="sum to 10 but the corpus has 9"):
            split(records, SplitSpec(5, 3, 2, seed=1))

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError, match="train_count"):
            SplitSpec(-1, 3, 2, seed=1)


class TestTrainingConfig:
    def write(self, tmp_path, text):
        path = tmp_path / "train.cfg"
        path.write_text(text)
        return path

    def test_parse_standard_file(self, tmp_path):
        path = self.write(
            tmp_path,
            "optimizer = Stochastic gradient descent\n"
            "learning-rate = 0.001\n"
            "momentum = 0.9\n"
            "epoch = 76\n"
            "training-set = 4250\n"
            "batch-size = 64\n"
            "image-size = 416x416\n",
        )
        config = read_training_config(path)
        assert config == TrainingConfig(
            optimizer="Stochastic gradient descent",
            learning_rate=0.001,
            momentum=0.9,
            epoch=76,
            batch_size=64,
            image_size=(416, 416),
            training_set=4250,
        )

    def test_training_set_is_optional(self, tmp_path):
        path = self.write(
            tmp_path,
            "optimizer = sgd\nlearning-rate = 0.0002\nmomentum = 0.9\n"
            "epoch = 155\nbatch-size = 16\nimage-size = 300x300\n",
        )
        config = read_training_config(path)
        assert config.training_set is None
        assert config.image_size == (300, 300)

    def test_round_trip(self, tmp_path):
        config = TrainingConfig("sgd", 0.0002, 0.9, 155, 16, (300, 300), 4250)
        path = tmp_path / "out.cfg"
        write_training_config(path, config)
        assert read_training_config(path) == config

    def test_missing_key(self, tmp_path):
        path = self.write(tmp_path, "optimizer = sgd\n")
        with pytest.raises(ValueError, match="missing required key 'learning-rate'"):
            read_training_config(path)

    def test_unknown_key(self, tmp_path):
        path = self.write(
            tmp_path,
            "optimizer = sgd\nlearning-rate = 0.001\nmomentum = 0.9\n"
            "epoch = 76\nbatch-size = 64\nimage-size = 416x416\nwarmup = 3\n",
        )
        with pytest.raises(ValueError, match="unknown key 'warmup'"):
            read_training_config(path)

    def test_duplicate_key(self, tmp_path):
        path = self.write(tmp_path, "epoch = 1\nepoch = 2\n")
        with pytest.raises(ValueError, match="duplicate key 'epoch'"):
            read_training_config(path)

    def test_bad_image_size(self, tmp_path):
        path = self.write(
            tmp_path,
            "optimizer = sgd\nlearning-rate = 0.001\nmomentum = 0.9\n"
            "epoch = 76\nbatch-size = 64\nimage-size = 416\n",
        )
        with pytest.raises(ValueError, match="416x416"):
            read_training_config(path)

    def test_validation(self):
        with pytest.raises(ValueError, match="learning_rate"):
            TrainingConfig("sgd", -0.1, 0.9, 76, 64, (416, 416))
        with pytest.raises(ValueError, match="momentum"):
            TrainingConfig("sgd", 0.1, 1.0, 76, 64, (416, 416))
        with pytest.raises(ValueError, match="epoch"):
            TrainingConfig("sgd", 0.1, 0.9, 0, 64, (416, 416))
