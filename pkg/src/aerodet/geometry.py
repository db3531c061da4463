"""Axis-aligned bounding-box primitives and overlap arithmetic.

Boxes are stored center-based (cx, cy, w, h) in continuous pixel
coordinates; no pixel-grid inclusive/exclusive convention is applied,
areas are pure geometric products. Corner form is available through
helpers where needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class BoundingBox:
    """A detection or ground-truth box with class id and optional score.

    cx, cy locate the box center, w and h are the full extents. All in
    pixels. ``confidence`` is set on detections and absent on truth boxes.
    """

    cx: float
    cy: float
    w: float
    h: float
    class_id: int = 0
    confidence: Optional[float] = None

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box dims must be positive, got w={self.w}, h={self.h}")
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must lie in [0,1], got {self.confidence}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> tuple[float, float, float, float]:
        """Return (x1, y1, x2, y2) with x1 < x2 and y1 < y2."""
        hw, hh = self.w / 2.0, self.h / 2.0
        return self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh

    @classmethod
    def from_corners(cls, x1, y1, x2, y2, class_id=0, confidence=None) -> "BoundingBox":
        return cls(
            cx=(x1 + x2) / 2.0,
            cy=(y1 + y2) / 2.0,
            w=x2 - x1,
            h=y2 - y1,
            class_id=class_id,
            confidence=confidence,
        )


@dataclass(frozen=True)
class AnchorBox:
    """A prior box shape, width and height in detection-grid cell units."""

    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"anchor dims must be positive, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    """Overlap area of two boxes; 0.0 when they are disjoint or just touch."""
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def _extent_area(box: BoundingBox) -> float:
    # area from corner extents, so it cancels exactly against
    # intersection_area's arithmetic (keeps iou(a,a) == 1.0 in floats)
    x1, y1, x2, y2 = box.corners()
    return (x2 - x1) * (y2 - y1)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes.

    Ratio of the overlap area to the union area (sum of areas minus the
    overlap). Returns a value in [0, 1] even under floating-point
    rounding; 0 for disjoint boxes, exactly 1 for identical ones.
    """
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = _extent_area(a) + _extent_area(b) - inter
    return inter / union


def intersects(a: BoundingBox, b: BoundingBox) -> bool:
    """True iff the boxes share strictly positive overlap area.

    Edge-to-edge contact (zero-area intersection) counts as non-overlapping,
    so this predicate is exactly ``iou(a, b) > 0``.
    """
    return intersection_area(a, b) > 0.0


def relative_area(box: BoundingBox, image_w: float, image_h: float) -> float:
    """Box area as a fraction of the image area."""
    if image_w <= 0 or image_h <= 0:
        raise ValueError(f"image dims must be positive, got {image_w}x{image_h}")
    return box.area / (image_w * image_h)


def iou_wh(w1: float, h1: float, w2: float, h2: float) -> float:
    """IOU of two boxes co-centered at the origin, given only their dims.

    Used by anchor clustering, where box positions are irrelevant.
    """
    inter = min(w1, w2) * min(h1, h2)
    return inter / (w1 * h1 + w2 * h2 - inter)
