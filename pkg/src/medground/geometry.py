"""Box representations, coordinate transforms, letterboxing, and overlap metrics.

Boxes come in two conventions:

* :class:`BoxXYXY` -- corner-form pixel coordinates in the image frame,
  origin top-left, treated as half-open real intervals so that
  ``area = (x2 - x1) * (y2 - y1)``.
* :class:`BoxNorm` -- center-form fractions of image width/height, the
  convention used as the regression target.

All functions here are pure and operate on immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MIN_AREA = 1e-8  # px^2; boxes below this are rejected everywhere


class DegenerateBoxError(ValueError):
    """Raised for boxes with non-positive or near-zero area."""


@dataclass(frozen=True)
class BoxXYXY:
    """Corner-form box (x1, y1, x2, y2) in continuous pixel coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise DegenerateBoxError(f"non-finite box coordinates: {vals}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise DegenerateBoxError(f"box must have x1 < x2 and y1 < y2: {vals}")
        if self.area < MIN_AREA:
            raise DegenerateBoxError(f"box area {self.area} below {MIN_AREA}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class BoxNorm:
    """Center-form box (cx, cy, w, h) as fractions of image width/height."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise DegenerateBoxError(f"non-finite normalized box: {vals}")
        if not all(0.0 < v <= 1.0 for v in vals):
            raise DegenerateBoxError(f"normalized fields must lie in (0, 1]: {vals}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)


@dataclass(frozen=True)
class LetterboxRecord:
    """Bookkeeping for an aspect-preserving resize-and-pad to a square.

    ``scale`` maps source pixels to target pixels; ``pad_x``/``pad_y`` are the
    total right/bottom padding amounts (padding is never applied top/left).
    """

    scale: float
    pad_x: float
    pad_y: float
    source_size: tuple[int, int]
    target_size: int


def iou(a: BoxXYXY, b: BoxXYXY) -> float:
    """Intersection over union of two corner-form boxes, in [0, 1]."""
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    iw = max(0.0, ix2 - ix1)
    ih = max(0.0, iy2 - iy1)
    inter = iw * ih
    union = a.area + b.area - inter
    return inter / union


def giou(a: BoxXYXY, b: BoxXYXY) -> float:
    """Generalized IoU: IoU minus the empty fraction of the enclosing box.

    Lies in (-1, 1]; equals :func:`iou` exactly when one box contains the
    other (the enclosing box is then the outer box itself).
    """
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    inter = max(0.0, ix2 - ix1) * max(0.0, iy2 - iy1)
    union = a.area + b.area - inter

    ex1 = min(a.x1, b.x1)
    ey1 = min(a.y1, b.y1)
    ex2 = max(a.x2, b.x2)
    ey2 = max(a.y2, b.y2)
    enclosing = (ex2 - ex1) * (ey2 - ey1)

    return inter / union - (enclosing - union) / enclosing


def to_norm(box: BoxXYXY, size: tuple[int, int]) -> BoxNorm:
    """Convert a corner-form pixel box to center-form fractions of ``size``."""
    w, h = size
    if w <= 0 or h <= 0:
        raise ValueError(f"image size must be positive, got {size}")
    tol = 1e-6
    if box.x1 < -tol or box.y1 < -tol or box.x2 > w + tol or box.y2 > h + tol:
        raise ValueError(f"box {box.as_tuple()} outside image bounds {size}")
    return BoxNorm(
        cx=(box.x1 + box.x2) / 2.0 / w,
        cy=(box.y1 + box.y2) / 2.0 / h,
        w=(box.x2 - box.x1) / w,
        h=(box.y2 - box.y1) / h,
    )


def to_xyxy(box: BoxNorm, size: tuple[int, int]) -> BoxXYXY:
    """Convert a center-form fractional box back to pixel corners."""
    w, h = size
    if w <= 0 or h <= 0:
        raise ValueError(f"image size must be positive, got {size}")
    half_w = box.w * w / 2.0
    half_h = box.h * h / 2.0
    cx = box.cx * w
    cy = box.cy * h
    return BoxXYXY(cx - half_w, cy - half_h, cx + half_w, cy + half_h)


def letterbox(size: tuple[int, int], target: int = 640) -> LetterboxRecord:
    """Plan an aspect-preserving resize of ``size`` into a ``target`` square.

    Content is scaled by ``target / max(w, h)`` and padded bottom/right only,
    so the source origin maps to the target origin.
    """
    w, h = size
    if w <= 0 or h <= 0:
        raise ValueError(f"source size must be positive, got {size}")
    if target <= 0:
        raise ValueError(f"target size must be positive, got {target}")
    scale = target / max(w, h)
    return LetterboxRecord(
        scale=scale,
        pad_x=target - w * scale,
        pad_y=target - h * scale,
        source_size=(w, h),
        target_size=target,
    )


def apply_letterbox(box: BoxXYXY, record: LetterboxRecord) -> BoxXYXY:
    """Map a source-frame box into the letterboxed frame."""
    s = record.scale
    return BoxXYXY(box.x1 * s, box.y1 * s, box.x2 * s, box.y2 * s)


def invert_letterbox(box: BoxXYXY, record: LetterboxRecord) -> BoxXYXY:
    """Map a letterboxed-frame box back to the source frame."""
    s = record.scale
    return BoxXYXY(box.x1 / s, box.y1 / s, box.x2 / s, box.y2 / s)


def clamp_to_image(
    box: tuple[float, float, float, float], size: tuple[int, int]
) -> tuple[tuple[float, float, float, float], bool]:
    """Clamp raw corners to image bounds; returns (corners, clamped_flag).

    Works on raw tuples because an out-of-frame prediction may not satisfy
    the BoxXYXY invariants until after clamping.
    """
    w, h = size
    x1, y1, x2, y2 = box
    cx1 = min(max(x1, 0.0), w)
    cy1 = min(max(y1, 0.0), h)
    cx2 = min(max(x2, 0.0), w)
    cy2 = min(max(y2, 0.0), h)
    clamped = (cx1, cy1, cx2, cy2) != (x1, y1, x2, y2)
    return (cx1, cy1, cx2, cy2), clamped
