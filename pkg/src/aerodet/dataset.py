"""Annotation ingest, aerial-dataset statistics, and sequence-aware splits.

Annotation files are UTF-8 text, one box per line:

    image_id sequence_id image_w image_h class_id cx cy w h

Detection files carry scores instead of dims:

    image_id class_id confidence cx cy w h

All coordinates are center-based pixels. Frames of the same video clip
share a sequence_id; truly independent stills use a unique sequence_id
per image, which makes the sequence-aware split degenerate to a plain
image split.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .geometry import BoundingBox, intersects, relative_area

logger = logging.getLogger(__name__)

RATIO_MODES = ("mean-of-ratios", "ratio-of-means")


class AnnotationError(ValueError):
    """Raised for lines that cannot be parsed into a valid box."""


@dataclass
class ImageRecord:
    image_id: str
    width: int
    height: int
    sequence_id: str
    boxes: list[BoundingBox]


@dataclass(frozen=True)
class DatasetStats:
    mean_box_w: float
    mean_box_h: float
    area_ratio: float
    pct_overlapping: float


class SplitResult(NamedTuple):
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]


def _clamp_box(box: BoundingBox, width: int, height: int):
    """Intersect a box with the image rectangle; None if nothing remains."""
    x1, y1, x2, y2 = box.corners()
    cx1, cy1 = max(0.0, x1), max(0.0, y1)
    cx2, cy2 = min(float(width), x2), min(float(height), y2)
    if cx2 <= cx1 or cy2 <= cy1:
        return None, True
    changed = (cx1, cy1, cx2, cy2) != (x1, y1, x2, y2)
    if not changed:
        return box, False
    return (
        BoundingBox.from_corners(
            cx1, cy1, cx2, cy2, class_id=box.class_id, confidence=box.confidence
        ),
        True,
    )


def _parse_fields(line: str, lineno: int, path, expected: int) -> list[str]:
    fields = line.split()
    if len(fields) != expected:
        raise AnnotationError(
            f"{path}:{lineno}: expected {expected} fields, got {len(fields)}"
        )
    return fields


def _to_number(token: str, lineno: int, path, kind=float):
    try:
        return kind(token)
    except ValueError:
        raise AnnotationError(f"{path}:{lineno}: non-numeric field {token!r}") from None


def load_annotations(path) -> list[ImageRecord]:
    """Parse an annotation file into per-image records.

    Lines sharing an image_id merge into one record (dims and sequence_id
    must agree). Boxes poking outside the image are clamped to it with a
    warning; boxes entirely outside are dropped with a warning.
    """
    path = Path(path)
    records: dict[str, ImageRecord] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = _parse_fields(line, lineno, path, 9)
        image_id, sequence_id = fields[0], fields[1]
        width = _to_number(fields[2], lineno, path, int)
        height = _to_number(fields[3], lineno, path, int)
        class_id = _to_number(fields[4], lineno, path, int)
        cx, cy, w, h = (_to_number(f, lineno, path) for f in fields[5:9])
        if width <= 0 or height <= 0:
            raise AnnotationError(f"{path}:{lineno}: non-positive image dims {width}x{height}")
        if w <= 0 or h <= 0:
            raise AnnotationError(f"{path}:{lineno}: non-positive box dims {w}x{h}")
        if class_id < 0:
            raise AnnotationError(f"{path}:{lineno}: negative class id {class_id}")

        record = records.get(image_id)
        if record is None:
            record = ImageRecord(image_id, width, height, sequence_id, [])
            records[image_id] = record
        elif (record.width, record.height, record.sequence_id) != (width, height, sequence_id):
            raise AnnotationError(
                f"{path}:{lineno}: image {image_id!r} redeclared with different dims or sequence"
            )

        box = BoundingBox(cx, cy, w, h, class_id=class_id)
        clamped, changed = _clamp_box(box, width, height)
        if clamped is None:
            logger.warning("%s:%d: box entirely outside %dx%d image, dropped", path, lineno, width, height)
            continue
        if changed:
            logger.warning("%s:%d: box extends outside %dx%d image, clamped", path, lineno, width, height)
        record.boxes.append(clamped)
    return list(records.values())


def load_detections(path) -> dict[str, list[BoundingBox]]:
    """Parse a detection file into boxes grouped by image_id."""
    path = Path(path)
    detections: dict[str, list[BoundingBox]] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = _parse_fields(line, lineno, path, 7)
        image_id = fields[0]
        class_id = _to_number(fields[1], lineno, path, int)
        confidence = _to_number(fields[2], lineno, path)
        cx, cy, w, h = (_to_number(f, lineno, path) for f in fields[3:7])
        if w <= 0 or h <= 0:
            raise AnnotationError(f"{path}:{lineno}: non-positive box dims {w}x{h}")
        if not (0.0 <= confidence <= 1.0):
            raise AnnotationError(f"{path}:{lineno}: confidence {confidence} outside [0,1]")
        detections.setdefault(image_id, []).append(
            BoundingBox(cx, cy, w, h, class_id=class_id, confidence=confidence)
        )
    return detections


def format_detections(dets_by_image: dict[str, list[BoundingBox]]) -> str:
    """Render detections in the file format load_detections reads."""
    lines = []
    for image_id in dets_by_image:
        for b in dets_by_image[image_id]:
            lines.append(
                f"{image_id} {b.class_id} {b.confidence:.6f} "
                f"{b.cx:.4f} {b.cy:.4f} {b.w:.4f} {b.h:.4f}"
            )
    return "\n".join(lines) + ("\n" if lines else "")


def compute_stats(records: Sequence[ImageRecord], ratio_mode: str = "mean-of-ratios") -> DatasetStats:
    """Aggregate box statistics: mean dims, area ratio, overlap percentage.

    area_ratio follows ``ratio_mode``: "mean-of-ratios" averages each box's
    area divided by its own image's area; "ratio-of-means" divides the
    mean box area (product of mean dims) by the mean image area. The two
    agree when box dims are constant and images uniform.

    pct_overlapping is the percentage of boxes that strictly intersect at
    least one other box in the same image.
    """
    if ratio_mode not in RATIO_MODES:
        raise ValueError(f"ratio_mode must be one of {RATIO_MODES}, got {ratio_mode!r}")
    boxes = [(box, rec) for rec in records for box in rec.boxes]
    if not boxes:
        raise ValueError("dataset holds no boxes")

    n = len(boxes)
    mean_w = sum(b.w for b, _ in boxes) / n
    mean_h = sum(b.h for b, _ in boxes) / n
    if ratio_mode == "mean-of-ratios":
        area_ratio = sum(relative_area(b, r.width, r.height) for b, r in boxes) / n
    else:
        mean_image_area = sum(r.width * r.height for _, r in boxes) / n
        area_ratio = mean_w * mean_h / mean_image_area

    overlapping = 0
    for rec in records:
        for i, box in enumerate(rec.boxes):
            if any(intersects(box, other) for j, other in enumerate(rec.boxes) if j != i):
                overlapping += 1
    return DatasetStats(
        mean_box_w=mean_w,
        mean_box_h=mean_h,
        area_ratio=area_ratio,
        pct_overlapping=100.0 * overlapping / n,
    )


def split(
    records: Sequence[ImageRecord],
    train_frac: float = 0.6,
    val_frac: float = 0.2,
    seed: int = 0,
) -> SplitResult:
    """Partition sequence ids into train/val/test; sequences never straddle.

    Whole sequences are assigned greedily, largest image count first, to
    whichever partition is furthest below its target image share. val and
    test always end up with at least one sequence each. The result depends
    only on the seed and the (sequence_id -> image count) map, never on
    record order. Test share is whatever train and val leave over.
    """
    if train_frac <= 0 or val_frac <= 0 or train_frac + val_frac > 1:
        raise ValueError(
            f"need positive fractions with train+val <= 1, got {train_frac}, {val_frac}"
        )
    counts: dict[str, int] = {}
    for rec in records:
        counts[rec.sequence_id] = counts.get(rec.sequence_id, 0) + 1
    if len(counts) < 3:
        raise ValueError(f"need at least 3 sequences to split, got {len(counts)}")

    order = sorted(counts)
    random.Random(seed).shuffle(order)
    order.sort(key=lambda s: counts[s], reverse=True)  # stable: keeps seeded order on ties

    total = sum(counts.values())
    targets = [train_frac * total, val_frac * total, (1.0 - train_frac - val_frac) * total]
    bins: list[list[str]] = [[], [], []]
    fill = [0, 0, 0]
    for seq in order:
        deficits = [targets[i] - fill[i] for i in range(3)]
        best = max(range(3), key=lambda i: (deficits[i], -i))  # ties prefer train, val, test
        bins[best].append(seq)
        fill[best] += counts[seq]

    # whole-sequence granularity can starve val or test; repair from the
    # largest bin so every partition is usable
    for needy in (1, 2):
        if bins[needy]:
            continue
        donor = max(range(3), key=lambda i: (len(bins[i]), fill[i], -i))
        moved = min(bins[donor], key=lambda s: (counts[s], s))
        bins[donor].remove(moved)
        bins[needy].append(moved)
        fill[donor] -= counts[moved]
        fill[needy] += counts[moved]

    return SplitResult(*(tuple(sorted(b)) for b in bins))


def images_by_sequence(records: Iterable[ImageRecord]) -> dict[str, list[str]]:
    """Map sequence_id to the image ids it contains, in record order."""
    out: dict[str, list[str]] = {}
    for rec in records:
        out.setdefault(rec.sequence_id, []).append(rec.image_id)
    return out
