"""Anchor estimation: k-means over box dims with IOU distance.

Boxes enter as bare (w, h) pairs in whatever unit the caller works in
(normalized or grid cells); clustering is position-free, so two boxes are
compared co-centered. Distance is 1 - IOU, centroid updates are plain
per-cluster means, and iteration stops when assignments are stable. All
arithmetic runs in a fixed order over plain floats, so a given seed
reproduces bit-identical output.
"""

from __future__ import annotations

import random
from typing import Iterable, Iterator, Sequence

from .geometry import AnchorBox, iou_wh

WH = tuple[float, float]


def _as_wh(box) -> WH:
    w, h = (box.w, box.h) if isinstance(box, AnchorBox) else (box[0], box[1])
    if not (w > 0 and h > 0):
        raise ValueError(f"box dims must be positive, got ({w}, {h})")
    return float(w), float(h)


def _distance(a: WH, b: WH) -> float:
    return 1.0 - iou_wh(a[0], a[1], b[0], b[1])


def mean_best_iou(boxes: Iterable, anchors: Iterable) -> float:
    """Mean over boxes of the best co-centered IOU any anchor achieves.

    The standard fit metric for an anchor set: 1.0 means every box is an
    exact anchor shape. Adding an anchor can never decrease it.
    """
    boxes = [_as_wh(b) for b in boxes]
    anchors = [_as_wh(a) for a in anchors]
    if not boxes or not anchors:
        raise ValueError("boxes and anchors must both be non-empty")
    total = 0.0
    for w, h in boxes:
        total += max(iou_wh(w, h, aw, ah) for aw, ah in anchors)
    return total / len(boxes)


def _seed_centroids(boxes: list[WH], k: int, rng: random.Random) -> list[WH]:
    """k-means++ style seeding: spread initial centroids by squared distance."""
    centroids = [boxes[rng.randrange(len(boxes))]]
    while len(centroids) < k:
        weights = [min(_distance(b, c) for c in centroids) ** 2 for b in boxes]
        total = sum(weights)
        if total == 0.0:
            # all boxes coincide with chosen centroids; k <= distinct count
            # guarantees an unused distinct box exists
            chosen = set(centroids)
            centroids.append(next(b for b in boxes if b not in chosen))
            continue
        r = rng.random() * total
        cumulative = 0.0
        pick = None
        for i, weight in enumerate(weights):
            if weight == 0.0:
                continue
            cumulative += weight
            pick = i
            if r < cumulative:
                break
        centroids.append(boxes[pick])
    return centroids


def _lloyd(boxes: list[WH], k: int, seed: int, max_iters: int) -> Iterator[list[WH]]:
    """Yield centroid states: after seeding, then after every accepted step.

    The update step proposes per-cluster means but only accepts them when
    they do not worsen mean_best_iou; a worsening proposal ends the
    iteration instead. The plain mean is not guaranteed to improve the
    IOU objective it clusters under (unlike the squared-Euclidean case),
    and without the guard the fit can regress mid-run.
    """
    rng = random.Random(seed)
    centroids = _seed_centroids(boxes, k, rng)
    yield centroids
    assignment: list[int] = []
    for _ in range(max_iters):
        new_assignment = []
        for box in boxes:
            best_j, best_d = 0, _distance(box, centroids[0])
            for j in range(1, k):
                d = _distance(box, centroids[j])
                if d < best_d:
                    best_j, best_d = j, d
            new_assignment.append(best_j)

        # repair empty clusters: reseed each from the box currently worst
        # served by its own centroid (never lowers any box's best IOU,
        # since no box preferred the empty centroid)
        repaired = False
        occupied = set(new_assignment)
        for j in range(k):
            if j in occupied:
                continue
            worst_i = max(
                range(len(boxes)),
                key=lambda i: (_distance(boxes[i], centroids[new_assignment[i]]), -i),
            )
            centroids = list(centroids)
            centroids[j] = boxes[worst_i]
            new_assignment[worst_i] = j
            occupied.add(j)
            repaired = True
        if repaired:
            yield centroids

        if new_assignment == assignment:
            return
        assignment = new_assignment

        sums = [[0.0, 0.0, 0] for _ in range(k)]
        for box, j in zip(boxes, assignment):
            sums[j][0] += box[0]
            sums[j][1] += box[1]
            sums[j][2] += 1
        candidate = [(sw / n, sh / n) for sw, sh, n in sums]
        if mean_best_iou(boxes, candidate) < mean_best_iou(boxes, centroids):
            return
        centroids = candidate
        yield centroids


def _check_inputs(boxes: Sequence, k: int) -> list[WH]:
    if not boxes:
        raise ValueError("cannot cluster an empty box list")
    normalized = [_as_wh(b) for b in boxes]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    distinct = len(set(normalized))
    if k > distinct:
        raise ValueError(f"k={k} exceeds the {distinct} distinct box dims available")
    return normalized


def kmeans_anchors(boxes: Sequence, k: int, seed: int = 0, max_iters: int = 100) -> list[AnchorBox]:
    """Cluster box dims into k anchors, sorted by area ascending.

    Args:
        boxes: (w, h) pairs (or AnchorBox), any consistent unit
        k: number of anchors; must not exceed the distinct dims present
        seed: controls seeding; same seed gives bit-identical anchors
        max_iters: iteration cap if assignments keep changing
    """
    normalized = _check_inputs(boxes, k)
    centroids = normalized[:k]
    for centroids in _lloyd(normalized, k, seed, max_iters):
        pass
    ordered = sorted(centroids, key=lambda c: (c[0] * c[1], c[0], c[1]))
    return [AnchorBox(w, h) for w, h in ordered]


def anchor_fit_history(
    boxes: Sequence, k: int, seed: int = 0, max_iters: int = 100
) -> list[float]:
    """mean_best_iou of the working centroids, from seeding through every
    Lloyd iteration. Useful for checking that the fit improves monotonically."""
    normalized = _check_inputs(boxes, k)
    return [
        mean_best_iou(normalized, centroids)
        for centroids in _lloyd(normalized, k, seed, max_iters)
    ]


def prune_largest(anchors: Sequence[AnchorBox], n: int) -> list[AnchorBox]:
    """Drop the n largest-area anchors, keeping survivor order.

    Ties on area remove the later-indexed anchor first.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n >= len(anchors):
        raise ValueError(f"cannot prune {n} of {len(anchors)} anchors")
    doomed_order = sorted(range(len(anchors)), key=lambda i: (anchors[i].area, i), reverse=True)
    doomed = set(doomed_order[:n])
    return [a for i, a in enumerate(anchors) if i not in doomed]


def format_anchors(anchors: Sequence[AnchorBox], precision: int = 4) -> str:
    """Comma-separated w,h pairs, the format the ``anchors=`` config key uses."""
    return ", ".join(f"{a.w:.{precision}f},{a.h:.{precision}f}" for a in anchors)


def parse_anchors(text: str) -> list[AnchorBox]:
    """Inverse of format_anchors; accepts any comma/whitespace separated floats."""
    values = [float(v) for v in text.replace(",", " ").split()]
    if not values or len(values) % 2:
        raise ValueError("anchors need an even, non-zero number of values")
    return [AnchorBox(values[i], values[i + 1]) for i in range(0, len(values), 2)]
