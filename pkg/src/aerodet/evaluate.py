"""Detection scoring: greedy matching, precision/recall/FAR, per-image
averaged AP/AR, and size-stratified variants.

AP and AR here are arithmetic means of per-image precision and recall at
a fixed IOU threshold (0.5 unless overridden), not PR-curve integrals; a
pooled VOC-style AP is available separately for comparison. FAR is
1 - precision. Images with no detections score a vacuous precision of
1.0, and images with no truth objects a vacuous recall of 1.0; per-image
averaging forces some convention and this one never penalizes silence on
empty images.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .geometry import BoundingBox, iou, relative_area

logger = logging.getLogger(__name__)

SIZE_BUCKETS = ("small", "medium", "large")
SMALL_MAX = 0.001   # relative area at or below this is "small"
MEDIUM_MAX = 0.003  # above small, at or below this is "medium"


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one image's detections against its truths."""

    tp: int
    fp: int
    fn: int
    matched_pairs: tuple[tuple[int, int, float], ...]  # (det idx, truth idx, iou)


@dataclass(frozen=True)
class EvalReport:
    per_image: tuple[tuple[str, float, float], ...]  # (image_id, precision, recall)
    ap: float
    ar: float
    far: float
    size_map: Optional[dict[str, tuple[float, float]]] = None
    unknown_image_detections: int = 0


def size_bucket(box: BoundingBox, image_w: float, image_h: float) -> str:
    """small / medium / large by box area relative to its image."""
    rel = relative_area(box, image_w, image_h)
    if rel <= SMALL_MAX:
        return "small"
    if rel <= MEDIUM_MAX:
        return "medium"
    return "large"


def match(
    dets: Sequence[BoundingBox],
    truths: Sequence[BoundingBox],
    iou_threshold: float = 0.5,
) -> MatchResult:
    """Greedily match detections to truths one-to-one at an IOU threshold.

    Detections are processed in descending confidence (exact ties resolve
    lexicographically by (cx, cy, w, h, class_id)); each takes the still
    unmatched truth of its class with the highest IOU >= threshold, lowest
    truth index on equal IOU. Leftover detections are false positives,
    leftover truths false negatives. Pair indices refer to the caller's
    original list order.
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise ValueError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    for det in dets:
        if det.confidence is None:
            raise ValueError("every detection needs a confidence")

    order = sorted(
        range(len(dets)),
        key=lambda i: (-dets[i].confidence, dets[i].cx, dets[i].cy, dets[i].w, dets[i].h,
                       dets[i].class_id),
    )
    unmatched = set(range(len(truths)))
    pairs = []
    for i in order:
        det = dets[i]
        best_j, best_iou = None, 0.0
        for j in sorted(unmatched):
            truth = truths[j]
            if truth.class_id != det.class_id:
                continue
            value = iou(det, truth)
            if value >= iou_threshold and value > best_iou:
                best_j, best_iou = j, value
        if best_j is not None:
            unmatched.discard(best_j)
            pairs.append((i, best_j, best_iou))
    pairs.sort()
    tp = len(pairs)
    return MatchResult(tp=tp, fp=len(dets) - tp, fn=len(truths) - tp, matched_pairs=tuple(pairs))


def precision(m: MatchResult) -> float:
    """tp / (tp + fp); vacuously 1.0 when there are no detections."""
    denom = m.tp + m.fp
    return 1.0 if denom == 0 else m.tp / denom


def recall(m: MatchResult) -> float:
    """tp / (tp + fn); vacuously 1.0 when there are no truth objects."""
    denom = m.tp + m.fn
    return 1.0 if denom == 0 else m.tp / denom


def far(p: float) -> float:
    """False alarm rate: 1 - precision."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"precision must lie in [0,1], got {p}")
    return 1.0 - p


def _threshold_dets(dets: Sequence[BoundingBox], conf_threshold: float) -> list[BoundingBox]:
    return [d for d in dets if d.confidence is not None and d.confidence >= conf_threshold]


def evaluate(
    dets_by_image: Mapping[str, Sequence[BoundingBox]],
    truths_by_image: Mapping[str, Sequence[BoundingBox]],
    iou_threshold: float = 0.5,
    conf_threshold: float = 0.25,
    image_dims: Optional[Mapping[str, tuple[float, float]]] = None,
) -> EvalReport:
    """Score detections against truth, averaging per image.

    Every image in ``truths_by_image`` contributes one precision and one
    recall value (an image may have an empty truth list); AP and AR are
    their arithmetic means and FAR is 1 - AP. Detections for unknown
    image ids are counted, warned about and skipped. When ``image_dims``
    maps image_id -> (w, h), the report also carries size-stratified
    AP/AR per small/medium/large bucket.
    """
    unknown = 0
    for image_id in sorted(dets_by_image):
        if image_id not in truths_by_image:
            count = len(dets_by_image[image_id])
            unknown += count
            logger.warning("%d detection(s) for unknown image %r ignored", count, image_id)

    per_image = []
    for image_id in sorted(truths_by_image):
        dets = _threshold_dets(dets_by_image.get(image_id, ()), conf_threshold)
        m = match(dets, truths_by_image[image_id], iou_threshold)
        per_image.append((image_id, precision(m), recall(m)))

    n = len(per_image)
    if n == 0:
        raise ValueError("no truth images to evaluate against")
    ap = sum(p for _, p, _ in per_image) / n
    ar = sum(r for _, _, r in per_image) / n

    size_map = None
    if image_dims is not None:
        size_map = size_stratified(
            dets_by_image, truths_by_image, image_dims, iou_threshold, conf_threshold
        )
    return EvalReport(
        per_image=tuple(per_image),
        ap=ap,
        ar=ar,
        far=far(ap),
        size_map=size_map,
        unknown_image_detections=unknown,
    )


def size_stratified(
    dets_by_image: Mapping[str, Sequence[BoundingBox]],
    truths_by_image: Mapping[str, Sequence[BoundingBox]],
    image_dims: Mapping[str, tuple[float, float]],
    iou_threshold: float = 0.5,
    conf_threshold: float = 0.25,
) -> dict[str, tuple[float, float]]:
    """Per-image averaged (AP, AR) restricted to each truth size bucket.

    For a bucket, matching runs against only that bucket's truths, and
    detections that the unrestricted match paired with a truth of another
    bucket are left out, so they do not surface as false positives in a
    stratum they do not belong to.
    """
    sums = {bucket: [0.0, 0.0] for bucket in SIZE_BUCKETS}
    n = 0
    for image_id in sorted(truths_by_image):
        if image_id not in image_dims:
            raise ValueError(f"no image dims for {image_id!r}")
        width, height = image_dims[image_id]
        truths = truths_by_image[image_id]
        dets = _threshold_dets(dets_by_image.get(image_id, ()), conf_threshold)
        buckets = [size_bucket(t, width, height) for t in truths]
        full = match(dets, truths, iou_threshold)
        matched_bucket = {i: buckets[j] for i, j, _ in full.matched_pairs}
        n += 1
        for bucket in SIZE_BUCKETS:
            bucket_truths = [t for t, b in zip(truths, buckets) if b == bucket]
            bucket_dets = [
                d for i, d in enumerate(dets) if matched_bucket.get(i, bucket) == bucket
            ]
            m = match(bucket_dets, bucket_truths, iou_threshold)
            sums[bucket][0] += precision(m)
            sums[bucket][1] += recall(m)
    if n == 0:
        raise ValueError("no truth images to evaluate against")
    return {bucket: (sums[bucket][0] / n, sums[bucket][1] / n) for bucket in SIZE_BUCKETS}


def voc_ap(
    dets_by_image: Mapping[str, Sequence[BoundingBox]],
    truths_by_image: Mapping[str, Sequence[BoundingBox]],
    iou_threshold: float = 0.5,
    conf_threshold: float = 0.0,
) -> tuple[float, float]:
    """Pooled PR-curve AP (area under the monotone envelope) and final recall.

    The classic benchmark alternative to per-image averaging: detections
    from all images are ranked together by confidence, matched greedily
    within their image, and precision is integrated over recall. Returns
    (ap, recall_at_end). With no truth objects at all, both are vacuously 1.
    """
    ranked = []
    for image_id in sorted(truths_by_image):
        for det in _threshold_dets(dets_by_image.get(image_id, ()), conf_threshold):
            ranked.append((image_id, det))
    ranked.sort(key=lambda pair: (-pair[1].confidence, pair[0], pair[1].cx, pair[1].cy,
                                  pair[1].w, pair[1].h, pair[1].class_id))

    total_truths = sum(len(t) for t in truths_by_image.values())
    if total_truths == 0:
        return 1.0, 1.0
    unmatched = {image_id: set(range(len(t))) for image_id, t in truths_by_image.items()}
    tps = []
    for image_id, det in ranked:
        truths = truths_by_image[image_id]
        best_j, best_iou = None, 0.0
        for j in sorted(unmatched[image_id]):
            truth = truths[j]
            if truth.class_id != det.class_id:
                continue
            value = iou(det, truth)
            if value >= iou_threshold and value > best_iou:
                best_j, best_iou = j, value
        if best_j is not None:
            unmatched[image_id].discard(best_j)
            tps.append(1)
        else:
            tps.append(0)

    tp_cum = 0
    points = []  # (recall, precision) along the ranking
    for rank, hit in enumerate(tps, start=1):
        tp_cum += hit
        points.append((tp_cum / total_truths, tp_cum / rank))

    # integrate precision over recall under the monotone envelope
    envelope = [0.0] * len(points)
    running = 0.0
    for i in range(len(points) - 1, -1, -1):
        running = max(running, points[i][1])
        envelope[i] = running
    ap = 0.0
    prev_recall = 0.0
    for (r, _), p in zip(points, envelope):
        if r > prev_recall:
            ap += (r - prev_recall) * p
            prev_recall = r
    final_recall = tp_cum / total_truths
    return ap, final_recall
