"""Decode raw detection-head tensors into scored boxes, plus greedy NMS.

A head tensor holds, for every grid cell and anchor, the raw regression
values (tx, ty, tw, th), an objectness logit, and one logit per class.
Decoding applies the usual transforms: sigmoid on the center offsets and
objectness, exponential on the size terms against the anchor priors, and
softmax over the class logits. Anchors are in grid-cell units, so the
same anchor set serves any input resolution.

Tensors travel in a small binary container (magic ``YTN1``): little-endian
u32 rank (always 4) and dims in (grid_h, grid_w, anchors, channels) order,
followed by the values as row-major little-endian float32.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import AnchorBox, BoundingBox, iou

MAGIC = b"YTN1"
COORDS = 4


@dataclass(frozen=True)
class HeadTensor:
    """Raw head output on a grid_h x grid_w grid.

    ``data`` has shape (grid_h, grid_w, num_anchors, 5 + classes) with the
    per-anchor channel order (tx, ty, tw, th, objectness, class logits...).
    """

    grid_w: int
    grid_h: int
    num_anchors: int
    classes: int
    data: np.ndarray

    def __post_init__(self):
        expected = (self.grid_h, self.grid_w, self.num_anchors, COORDS + 1 + self.classes)
        if self.data.shape != expected:
            raise ValueError(f"tensor data shape {self.data.shape} != expected {expected}")
        if self.classes < 1:
            raise ValueError("need at least one class")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _softmax(logits, axis):
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def decode(
    tensor: HeadTensor,
    anchors: Sequence[AnchorBox],
    image_w: float,
    image_h: float,
    conf_threshold: float = 0.25,
) -> list[BoundingBox]:
    """Turn a head tensor into confidence-scored boxes in image pixels.

    Per cell and anchor: center = (sigmoid(tx) + cell_x) / grid_w scaled to
    the image, size = anchor * exp(tw,th) in grid units scaled likewise,
    confidence = sigmoid(objectness) * max class probability, class = that
    argmax. Boxes scoring below ``conf_threshold`` are dropped; survivors
    are clamped to the image rectangle.

    Output order is row-major over (cell_y, cell_x, anchor).
    """
    if len(anchors) != tensor.num_anchors:
        raise ValueError(f"got {len(anchors)} anchors for a {tensor.num_anchors}-anchor tensor")
    if not (0.0 <= conf_threshold <= 1.0):
        raise ValueError(f"conf_threshold must lie in [0,1], got {conf_threshold}")
    data = np.asarray(tensor.data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise ValueError("tensor contains non-finite values")

    gw, gh = tensor.grid_w, tensor.grid_h
    cell_x = np.arange(gw, dtype=np.float64).reshape(1, gw, 1)
    cell_y = np.arange(gh, dtype=np.float64).reshape(gh, 1, 1)
    anchor_w = np.array([a.w for a in anchors], dtype=np.float64).reshape(1, 1, -1)
    anchor_h = np.array([a.h for a in anchors], dtype=np.float64).reshape(1, 1, -1)

    cx = (_sigmoid(data[..., 0]) + cell_x) / gw * image_w
    cy = (_sigmoid(data[..., 1]) + cell_y) / gh * image_h
    bw = anchor_w * np.exp(data[..., 2]) / gw * image_w
    bh = anchor_h * np.exp(data[..., 3]) / gh * image_h
    objectness = _sigmoid(data[..., 4])
    class_probs = _softmax(data[..., 5:], axis=-1)
    class_ids = np.argmax(class_probs, axis=-1)
    confidence = objectness * np.take_along_axis(
        class_probs, class_ids[..., None], axis=-1
    )[..., 0]

    boxes = []
    for y in range(gh):
        for x in range(gw):
            for a in range(tensor.num_anchors):
                conf = confidence[y, x, a]
                if conf < conf_threshold:
                    continue
                x1 = max(0.0, cx[y, x, a] - bw[y, x, a] / 2.0)
                y1 = max(0.0, cy[y, x, a] - bh[y, x, a] / 2.0)
                x2 = min(float(image_w), cx[y, x, a] + bw[y, x, a] / 2.0)
                y2 = min(float(image_h), cy[y, x, a] + bh[y, x, a] / 2.0)
                boxes.append(
                    BoundingBox.from_corners(
                        x1, y1, x2, y2,
                        class_id=int(class_ids[y, x, a]),
                        confidence=float(conf),
                    )
                )
    return boxes


def nms(boxes: Sequence[BoundingBox], iou_threshold: float = 0.45) -> list[BoundingBox]:
    """Greedy non-maximum suppression within each class.

    Repeatedly keeps the highest-confidence remaining box and discards
    same-class boxes overlapping it with IOU >= threshold. The result is
    sorted by confidence descending; exact confidence ties order by
    (cx, cy, w, h, class_id) so repeated runs are byte-stable.
    """
    for box in boxes:
        if box.confidence is None:
            raise ValueError("nms requires every box to carry a confidence")
    ordered = sorted(
        boxes, key=lambda b: (-b.confidence, b.cx, b.cy, b.w, b.h, b.class_id)
    )
    kept: list[BoundingBox] = []
    for candidate in ordered:
        if any(
            k.class_id == candidate.class_id and iou(k, candidate) >= iou_threshold
            for k in kept
        ):
            continue
        kept.append(candidate)
    return kept


def write_head_tensor(path, tensor: HeadTensor) -> None:
    """Serialize a head tensor to the YTN1 binary container."""
    data = np.ascontiguousarray(tensor.data, dtype="<f4")
    dims = (tensor.grid_h, tensor.grid_w, tensor.num_anchors, COORDS + 1 + tensor.classes)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(data.tobytes())


def read_head_tensor(path) -> HeadTensor:
    """Load a YTN1 tensor file written by :func:`write_head_tensor`."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a YTN1 tensor file")
    (ndim,) = struct.unpack_from("<I", raw, 4)
    if ndim != 4:
        raise ValueError(f"{path}: expected 4 dims (grid_h, grid_w, anchors, channels), got {ndim}")
    dims = struct.unpack_from(f"<{ndim}I", raw, 8)
    grid_h, grid_w, num_anchors, channels = dims
    if channels < COORDS + 2:
        raise ValueError(f"{path}: {channels} channels cannot hold coords+objectness+classes")
    count = math.prod(dims)
    offset = 8 + 4 * ndim
    if len(raw) - offset != 4 * count:
        raise ValueError(f"{path}: payload holds {(len(raw) - offset) // 4} floats, expected {count}")
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=offset).reshape(dims)
    return HeadTensor(
        grid_w=grid_w,
        grid_h=grid_h,
        num_anchors=num_anchors,
        classes=channels - COORDS - 1,
        data=data,
    )
