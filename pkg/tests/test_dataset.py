import random

import pytest

from aerodet.dataset import (
    AnnotationError,
    ImageRecord,
    compute_stats,
    format_detections,
    images_by_sequence,
    load_annotations,
    load_detections,
    split,
)
from aerodet.geometry import BoundingBox


def write(tmp_path, text, name="ann.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def records_with(n_seq, per_seq, box=(50.0, 50.0, 10.0, 10.0), dims=(100, 100)):
    recs = []
    for s in range(n_seq):
        for i in range(per_seq):
            recs.append(
                ImageRecord(
                    f"s{s:02d}_f{i:03d}", dims[0], dims[1], f"seq{s:02d}",
                    [BoundingBox(*box)],
                )
            )
    return recs


def test_single_line_single_record(tmp_path):
    path = write(tmp_path, "img0 clipA 640 480 0 100 100 30 20\n")
    records = load_annotations(path)
    assert len(records) == 1
    rec = records[0]
    assert (rec.image_id, rec.sequence_id, rec.width, rec.height) == ("img0", "clipA", 640, 480)
    assert rec.boxes == [BoundingBox(100, 100, 30, 20, class_id=0)]


def test_lines_with_same_image_merge(tmp_path):
    path = write(
        tmp_path,
        "img0 clipA 640 480 0 100 100 30 20\nimg0 clipA 640 480 1 200 150 40 25\n",
    )
    records = load_annotations(path)
    assert len(records) == 1
    assert len(records[0].boxes) == 2


def test_comments_and_blank_lines_skipped(tmp_path):
    path = write(tmp_path, "# header\n\nimg0 clipA 640 480 0 100 100 30 20\n")
    assert len(load_annotations(path)) == 1


def test_out_of_bounds_box_clamped_with_warning(tmp_path, caplog):
    # center on the right edge: half the box pokes out
    path = write(tmp_path, "img0 clipA 640 480 0 640 240 40 40\n")
    with caplog.at_level("WARNING", logger="aerodet.dataset"):
        records = load_annotations(path)
    assert len(caplog.records) == 1
    box = records[0].boxes[0]
    assert box.corners() == (620.0, 220.0, 640.0, 260.0)


def test_fully_outside_box_dropped_with_warning(tmp_path, caplog):
    path = write(tmp_path, "img0 clipA 640 480 0 900 900 10 10\nimg0 clipA 640 480 0 5 5 4 4\n")
    with caplog.at_level("WARNING", logger="aerodet.dataset"):
        records = load_annotations(path)
    assert len(records[0].boxes) == 1
    assert len(caplog.records) == 1


@pytest.mark.parametrize(
    "line",
    [
        "img0 clipA 640 480 0 100 100 30",        # column count
        "img0 clipA 640 480 0 100 100 thirty 20",  # non-numeric
        "img0 clipA 640 -480 0 100 100 30 20",     # non-positive image dim
        "img0 clipA 640 480 0 100 100 0 20",       # non-positive box dim
        "img0 clipA 640 480 -1 100 100 30 20",     # negative class
    ],
)
def test_malformed_annotation_lines_rejected(tmp_path, line):
    with pytest.raises(AnnotationError):
        load_annotations(write(tmp_path, line + "\n"))


def test_conflicting_image_redeclaration_rejected(tmp_path):
    text = "img0 clipA 640 480 0 100 100 30 20\nimg0 clipB 640 480 0 10 10 5 5\n"
    with pytest.raises(AnnotationError):
        load_annotations(write(tmp_path, text))


def test_detection_round_trip(tmp_path):
    dets = {
        "img0": [BoundingBox(100.5, 99.25, 30.0, 20.0, class_id=1, confidence=0.875)],
        "img1": [BoundingBox(5.0, 5.0, 2.0, 2.0, class_id=0, confidence=0.25)],
    }
    path = write(tmp_path, format_detections(dets), "dets.txt")
    back = load_detections(path)
    assert set(back) == {"img0", "img1"}
    box = back["img0"][0]
    assert (box.cx, box.cy, box.w, box.h, box.class_id, box.confidence) == (
        100.5, 99.25, 30.0, 20.0, 1, 0.875,
    )


def test_detection_confidence_range_checked(tmp_path):
    with pytest.raises(AnnotationError):
        load_detections(write(tmp_path, "img0 0 1.5 10 10 5 5\n", "dets.txt"))


def test_stats_uniform_vedai_row():
    records = [
        ImageRecord(f"im{i}", 1024, 1024, f"s{i}", [BoundingBox(300 + i, 300, 41.2, 40.8)])
        for i in range(16)
    ]
    stats = compute_stats(records)
    assert stats.mean_box_w == pytest.approx(41.2)
    assert stats.mean_box_h == pytest.approx(40.8)
    assert stats.area_ratio == pytest.approx(0.0016, abs=5e-5)
    assert stats.pct_overlapping == 0.0


def test_stats_ratio_of_means_mode():
    records = [
        ImageRecord("a", 100, 100, "s0", [BoundingBox(20, 20, 4, 10), BoundingBox(70, 70, 8, 2)]),
    ]
    stats = compute_stats(records, ratio_mode="ratio-of-means")
    # mean dims 6x6 over mean image area 10000
    assert stats.area_ratio == pytest.approx(36.0 / 10000.0)
    mean_of_ratios = compute_stats(records).area_ratio
    assert mean_of_ratios == pytest.approx((40.0 + 16.0) / 2.0 / 10000.0)


def test_stats_counts_overlapping_boxes():
    # exactly two of three boxes intersect each other
    records = [
        ImageRecord(
            "a", 100, 100, "s0",
            [
                BoundingBox(20, 20, 10, 10),
                BoundingBox(25, 20, 10, 10),
                BoundingBox(80, 80, 10, 10),
            ],
        )
    ]
    stats = compute_stats(records)
    assert stats.pct_overlapping == pytest.approx(200.0 / 3.0)


def test_stats_overlap_is_per_image():
    # same coordinates but different images: no overlap
    records = [
        ImageRecord("a", 100, 100, "s0", [BoundingBox(20, 20, 10, 10)]),
        ImageRecord("b", 100, 100, "s1", [BoundingBox(20, 20, 10, 10)]),
    ]
    assert compute_stats(records).pct_overlapping == 0.0


def test_stats_reject_empty():
    with pytest.raises(ValueError):
        compute_stats([])
    with pytest.raises(ValueError):
        compute_stats([ImageRecord("a", 10, 10, "s", [])])


def test_stats_rejects_unknown_mode():
    records = [ImageRecord("a", 10, 10, "s", [BoundingBox(5, 5, 1, 1)])]
    with pytest.raises(ValueError):
        compute_stats(records, ratio_mode="geometric")


def test_split_ten_sequences_is_6_2_2():
    records = records_with(10, 5)
    for seed in range(10):
        result = split(records, seed=seed)
        assert tuple(len(part) for part in result) == (6, 2, 2)


def test_split_three_sequences_holds_out_val_and_test():
    for seed in range(10):
        result = split(records_with(3, 7), seed=seed)
        assert all(len(part) >= 1 for part in result)


def test_split_unique_sequences_acts_as_image_split():
    records = records_with(10, 1)  # every image its own sequence
    result = split(records, seed=4)
    assert tuple(len(part) for part in result) == (6, 2, 2)


def test_split_partitions_are_disjoint_and_complete():
    rng = random.Random(0)
    for trial in range(50):
        n_seq = rng.randint(3, 12)
        records = []
        for s in range(n_seq):
            for i in range(rng.randint(1, 9)):
                records.append(
                    ImageRecord(f"t{trial}_s{s}_f{i}", 50, 50, f"seq{s}",
                                [BoundingBox(25, 25, 5, 5)])
                )
        result = split(records, seed=trial)
        parts = [set(p) for p in result]
        assert parts[0] | parts[1] | parts[2] == {r.sequence_id for r in records}
        assert not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])
        assert all(len(p) >= 1 for p in parts[1:])


def test_split_sequences_never_straddle():
    records = records_with(5, 4)
    result = split(records, seed=1)
    by_seq = images_by_sequence(records)
    for part in result:
        for seq in part:
            others = [p for p in result if seq not in p]
            assert len(others) == 2
    # every image of a held-out sequence is outside train
    train_images = {img for seq in result.train for img in by_seq[seq]}
    for seq in list(result.val) + list(result.test):
        assert not (set(by_seq[seq]) & train_images)


def test_split_permutation_insensitive():
    records = records_with(8, 3)
    baseline = split(records, seed=5)
    shuffled = records[:]
    random.Random(99).shuffle(shuffled)
    assert split(shuffled, seed=5) == baseline


def test_split_deterministic_per_seed():
    records = records_with(9, 4)
    assert split(records, seed=2) == split(records, seed=2)


def test_split_rejects_too_few_sequences():
    with pytest.raises(ValueError):
        split(records_with(2, 5))


def test_split_rejects_bad_fractions():
    records = records_with(4, 2)
    with pytest.raises(ValueError):
        split(records, train_frac=0.0)
    with pytest.raises(ValueError):
        split(records, train_frac=0.9, val_frac=0.2)
