"""Toolkit for analyzing and evaluating aerial vehicle detectors.

Non-neural machinery around a single-class YOLO-style detector: network
configuration parsing and static shape propagation, head-output decoding
with NMS, anchor estimation by IOU k-means, aerial dataset statistics and
sequence-aware splitting, and a per-image precision/recall/FAR evaluation
protocol with size-stratified scoring.
"""

from .geometry import AnchorBox, BoundingBox, intersects, iou, iou_wh, relative_area

__version__ = "0.1.0"

__all__ = [
    "AnchorBox",
    "BoundingBox",
    "intersects",
    "iou",
    "iou_wh",
    "relative_area",
    "__version__",
]
