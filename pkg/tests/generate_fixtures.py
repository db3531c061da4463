#!/usr/bin/env python3
"""Regenerate the bundled fixture corpus.

Annotation corpora are engineered so their statistics land on the
published per-dataset values (image dims, mean box dims, area ratio).
The golden decode/evaluate fixtures are produced by the scalar oracle
implementations in oracles.py, NOT by the library, so the committed
outputs independently pin the whole pipeline.

Run from the repository root:  python tests/generate_fixtures.py
"""

import random
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))
from oracles import (  # noqa: E402
    oracle_decode,
    oracle_match_counts,
    oracle_nms,
    oracle_per_image_metrics,
    oracle_size_strata,
)

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "aerodet" / "fixtures"

GOLDEN_ANCHORS = [(1.2, 0.9), (2.8, 1.7), (5.0, 3.5)]
GOLDEN_IMAGE = (640.0, 480.0)
GOLDEN_DECODE_CONF = 0.3
GOLDEN_NMS_IOU = 0.45
GOLDEN_EVAL_IOU = 0.5
GOLDEN_EVAL_CONF = 0.25


def annotation_line(image_id, seq, img_w, img_h, cls, cx, cy, w, h):
    return f"{image_id} {seq} {img_w} {img_h} {cls} {cx} {cy} {w} {h}"


def write_vedai(path):
    """Satellite stills: 1024x1024, uniform 41.2x40.8 boxes, one image per
    sequence (independent frames)."""
    lines = ["# synthetic corpus shaped like the VEDAI satellite imagery rows"]
    for i in range(12):
        image_id = f"vedai_{i:03d}"
        for b in range(2):
            cx = 150.0 + 180.0 * b + 25.0 * i
            cy = 200.0 + 300.0 * b + 10.0 * i
            lines.append(
                annotation_line(image_id, f"still_{i:03d}", 1024, 1024, 0, cx, cy, 41.2, 40.8)
            )
    path.write_text("\n".join(lines) + "\n")


def write_dlr3k(path):
    """Wide-area aerial frames: 5616x3744, uniform 30.4x30.0 boxes."""
    lines = ["# synthetic corpus shaped like the DLR3k wide-area aerial rows"]
    for i in range(8):
        image_id = f"dlr_{i:03d}"
        for b in range(3):
            cx = 400.0 + 900.0 * b + 55.0 * i
            cy = 350.0 + 800.0 * b + 40.0 * i
            lines.append(
                annotation_line(image_id, f"still_{i:03d}", 5616, 3744, 0, cx, cy, 30.4, 30.0)
            )
    path.write_text("\n".join(lines) + "\n")


def write_afvid2(path):
    """UAV video: 1600x1200, 10 clips x 5 frames, two box shapes whose mean
    dims are 55.6x63.7 and whose mean relative area is exactly 0.0019.

    Shapes (45.6, 53.072) and (65.6, 74.328) in equal counts: means match,
    and (45.6*53.072 + 65.6*74.328) / 2 = 3648 = 0.0019 * 1600 * 1200.
    """
    shapes = [(45.6, 53.072), (65.6, 74.328)]
    lines = ["# synthetic corpus shaped like the AFVID 2 UAV video rows"]
    for clip in range(10):
        for frame in range(5):
            image_id = f"clip{clip:02d}_f{frame:03d}"
            for b in range(2):
                w, h = shapes[b]
                cx = 250.0 + 700.0 * b + 30.0 * clip
                cy = 300.0 + 500.0 * b + 15.0 * frame
                lines.append(
                    annotation_line(image_id, f"clip{clip:02d}", 1600, 1200, 0, cx, cy, w, h)
                )
    path.write_text("\n".join(lines) + "\n")


def write_three_clips(path):
    """Minimal split fixture: three clips of different lengths."""
    lines = ["# three video clips, for hold-out splitting"]
    for clip, frames in (("a", 4), ("b", 3), ("c", 2)):
        for frame in range(frames):
            image_id = f"{clip}_f{frame}"
            lines.append(
                annotation_line(image_id, f"clip_{clip}", 640, 480, 0, 320.0, 240.0, 30.0, 20.0)
            )
    path.write_text("\n".join(lines) + "\n")


def write_varied(path):
    """Boxes of many distinct shapes for anchor clustering runs."""
    rng = random.Random(20240817)
    lines = ["# varied vehicle boxes for anchor estimation"]
    for i in range(12):
        image_id = f"var_{i:03d}"
        for _ in range(4):
            w = round(rng.uniform(18.0, 95.0), 1)
            h = round(rng.uniform(14.0, 80.0), 1)
            cx = round(rng.uniform(60.0, 580.0), 1)
            cy = round(rng.uniform(50.0, 430.0), 1)
            lines.append(annotation_line(image_id, "clipA", 640, 480, 0, cx, cy, w, h))
    path.write_text("\n".join(lines) + "\n")


def detection_line(image_id, d):
    return (
        f"{image_id} {d['class_id']} {d['confidence']:.6f} "
        f"{d['cx']:.4f} {d['cy']:.4f} {d['w']:.4f} {d['h']:.4f}"
    )


def make_golden(golden_dir):
    golden_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240817)
    grid_w = grid_h = 4
    num_anchors = len(GOLDEN_ANCHORS)
    classes = 2
    data = rng.normal(size=(grid_h, grid_w, num_anchors, 5 + classes)).astype("<f4")

    # container bytes written directly; layout doubles as format documentation
    import struct

    with open(golden_dir / "head.ytn", "wb") as fh:
        fh.write(b"YTN1")
        fh.write(struct.pack("<I", 4))
        fh.write(struct.pack("<4I", grid_h, grid_w, num_anchors, 5 + classes))
        fh.write(data.tobytes())

    image_w, image_h = GOLDEN_IMAGE
    decoded = oracle_decode(data, GOLDEN_ANCHORS, image_w, image_h, GOLDEN_DECODE_CONF)
    kept = oracle_nms(decoded, GOLDEN_NMS_IOU)
    det_lines = [detection_line("frame_000", d) for d in kept]
    (golden_dir / "detections.txt").write_text("\n".join(det_lines) + "\n")

    # truths: perturb a few kept detections into matches, then add misses
    # in the small and medium strata plus a second, detection-free image
    truths_by_image = {"frame_000": [], "frame_001": []}
    for i, d in enumerate(kept[:4]):
        truths_by_image["frame_000"].append(
            {
                "cx": round(d["cx"] + 3.0 - i, 1),
                "cy": round(d["cy"] - 2.0 + i, 1),
                "w": round(d["w"] * 0.95, 1),
                "h": round(d["h"] * 1.05, 1),
                "class_id": d["class_id"],
            }
        )
    truths_by_image["frame_000"].append(
        {"cx": 30.0, "cy": 40.0, "w": 15.0, "h": 15.0, "class_id": 0}  # small, missed
    )
    truths_by_image["frame_000"].append(
        {"cx": 600.0, "cy": 50.0, "w": 25.0, "h": 30.0, "class_id": 1}  # medium, missed
    )
    truths_by_image["frame_001"] = [
        {"cx": 100.0, "cy": 100.0, "w": 40.0, "h": 30.0, "class_id": 0},
        {"cx": 400.0, "cy": 300.0, "w": 22.0, "h": 18.0, "class_id": 1},
    ]
    truth_lines = []
    for image_id in ("frame_000", "frame_001"):
        for t in truths_by_image[image_id]:
            truth_lines.append(
                annotation_line(
                    image_id, image_id, int(image_w), int(image_h),
                    t["class_id"], t["cx"], t["cy"], t["w"], t["h"],
                )
            )
    (golden_dir / "truths.txt").write_text("\n".join(truth_lines) + "\n")

    # report computed straight-line from the two text files
    dets_by_image = {"frame_000": []}
    for line in det_lines:
        fields = line.split()
        dets_by_image["frame_000"].append(
            {
                "class_id": int(fields[1]),
                "confidence": float(fields[2]),
                "cx": float(fields[3]),
                "cy": float(fields[4]),
                "w": float(fields[5]),
                "h": float(fields[6]),
            }
        )
    parsed_truths = {"frame_000": [], "frame_001": []}
    for line in truth_lines:
        fields = line.split()
        parsed_truths[fields[0]].append(
            {
                "class_id": int(fields[4]),
                "cx": float(fields[5]),
                "cy": float(fields[6]),
                "w": float(fields[7]),
                "h": float(fields[8]),
                "confidence": None,
            }
        )
    dims = {k: GOLDEN_IMAGE for k in parsed_truths}

    usable = {
        k: [d for d in v if d["confidence"] >= GOLDEN_EVAL_CONF]
        for k, v in dets_by_image.items()
    }
    per_image = []
    for image_id in sorted(parsed_truths):
        p, r = oracle_per_image_metrics(
            usable.get(image_id, []), parsed_truths[image_id], GOLDEN_EVAL_IOU
        )
        per_image.append((image_id, p, r))
    ap = sum(p for _, p, _ in per_image) / len(per_image)
    ar = sum(r for _, _, r in per_image) / len(per_image)
    strata = oracle_size_strata(usable, parsed_truths, dims, GOLDEN_EVAL_IOU)

    width = max(len("image"), max(len(i) for i, _, _ in per_image))
    lines = [f"per-image results (iou={GOLDEN_EVAL_IOU:.2f}, conf={GOLDEN_EVAL_CONF:.2f})"]
    lines.append(f"{'image'.ljust(width)}  precision  recall")
    for image_id, p, r in per_image:
        lines.append(f"{image_id.ljust(width)}  {p:.6f}   {r:.6f}")
    lines.append("ap_mode=per-image")
    lines.append(f"ap={ap:.6f}")
    lines.append(f"ar={ar:.6f}")
    lines.append(f"far={1.0 - ap:.6f}")
    lines.append(f"images={len(per_image)}")
    lines.append("unknown_image_detections=0")
    for bucket in ("small", "medium", "large"):
        lines.append(f"map_{bucket}={strata[bucket][0]:.6f}")
        lines.append(f"mar_{bucket}={strata[bucket][1]:.6f}")
    (golden_dir / "report.txt").write_text("\n".join(lines) + "\n")

    counts = oracle_match_counts(
        usable["frame_000"], parsed_truths["frame_000"], GOLDEN_EVAL_IOU
    )
    print(f"golden: {len(kept)} detections, frame_000 tp/fp/fn={counts}, ap={ap:.6f}")


def main():
    annotations = FIXTURES / "annotations"
    annotations.mkdir(parents=True, exist_ok=True)
    write_vedai(annotations / "vedai_synth.txt")
    write_dlr3k(annotations / "dlr3k_synth.txt")
    write_afvid2(annotations / "afvid2_synth.txt")
    write_three_clips(annotations / "three_clips.txt")
    write_varied(annotations / "varied_boxes.txt")
    make_golden(FIXTURES / "golden")
    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
