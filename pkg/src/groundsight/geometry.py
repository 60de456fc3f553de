"""Axis-aligned bounding box arithmetic.

Boxes live in continuous pixel coordinates with the origin at the top-left
corner, x growing rightward and y growing downward. Rasterized crops use
half-open extents [x_min, x_max) so that adjacent crops do not overlap.

All functions here are pure and safe to call from concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ClampedToEmpty


@dataclass(frozen=True)
class BBox:
    """An axis-aligned box. Zero-area (degenerate) boxes are valid values."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite: {coords}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"invalid box: {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class ImageDims:
    """Pixel dimensions of a decoded image."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image dims must be positive, got {self.width}x{self.height}")


def intersect(a: BBox, b: BBox) -> BBox | None:
    """Overlap box of ``a`` and ``b``, or None when they are disjoint.

    Boxes that touch only along an edge or at a corner count as disjoint
    (the overlap would have zero area).
    """
    x_min = max(a.x_min, b.x_min)
    y_min = max(a.y_min, b.y_min)
    x_max = min(a.x_max, b.x_max)
    y_max = min(a.y_max, b.y_max)
    if x_max <= x_min or y_max <= y_min:
        return None
    return BBox(x_min, y_min, x_max, y_max)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes, in [0, 1].

    The union area is area(a) + area(b) - overlap. When both boxes are
    degenerate the ratio is formally 0/0; it is defined as 0 here so that a
    degenerate prediction never scores as a match.
    """
    overlap = intersect(a, b)
    inter_area = overlap.area() if overlap is not None else 0.0
    union_area = a.area() + b.area() - inter_area
    if union_area <= 0:
        return 0.0
    return inter_area / union_area


def clamp_to_image(box: BBox, dims: ImageDims) -> BBox:
    """Clip ``box`` to the image frame [0, width] x [0, height].

    Raises:
        ClampedToEmpty: if nothing with positive area remains. Callers fall
            back to the full image in that case.
    """
    x_min = min(max(box.x_min, 0.0), float(dims.width))
    y_min = min(max(box.y_min, 0.0), float(dims.height))
    x_max = min(max(box.x_max, 0.0), float(dims.width))
    y_max = min(max(box.y_max, 0.0), float(dims.height))
    clipped = BBox(x_min, y_min, x_max, y_max)
    if clipped.area() <= 0:
        raise ClampedToEmpty(f"box {box.as_tuple()} has no area inside {dims.width}x{dims.height}")
    return clipped


def raster_bounds(box: BBox, dims: ImageDims | None = None) -> tuple[int, int, int, int]:
    """Integer half-open pixel extents (left, top, right, bottom) covering ``box``.

    Uses floor on the minima and ceil on the maxima so no annotated content is
    lost at fractional edges, then clips to the frame when ``dims`` is given.
    """
    left = math.floor(box.x_min)
    top = math.floor(box.y_min)
    right = math.ceil(box.x_max)
    bottom = math.ceil(box.y_max)
    if dims is not None:
        left = max(left, 0)
        top = max(top, 0)
        right = min(right, dims.width)
        bottom = min(bottom, dims.height)
    return left, top, right, bottom


def full_image_box(dims: ImageDims) -> BBox:
    """The box covering the whole frame."""
    return BBox(0.0, 0.0, float(dims.width), float(dims.height))
