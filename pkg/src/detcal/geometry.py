"""Axis-aligned boxes and overlap measures.

Boxes are stored in corner form (x_min, y_min, x_max, y_max) in continuous
pixel coordinates. Degenerate boxes (zero width or height) are legal; they
have zero area and zero overlap with everything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle, corner form.

    Raises ValueError if any coordinate is non-finite or the corners are
    out of order.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        for name in ("x_min", "y_min", "x_max", "y_max"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"box coordinate {name} must be a finite number, got {value!r}")
        if self.x_max < self.x_min:
            raise ValueError(f"box has x_max < x_min ({self.x_max} < {self.x_min})")
        if self.y_max < self.y_min:
            raise ValueError(f"box has y_max < y_min ({self.y_max} < {self.y_min})")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def translate(self, dx: float, dy: float) -> "Box":
        return Box(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)


def area(box: Box) -> float:
    """Area of the box; zero for degenerate boxes."""
    return box.width * box.height


def intersection_area(a: Box, b: Box) -> float:
    """Area of the overlap region, zero when the boxes are disjoint or touch."""
    width = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    if width <= 0.0:
        return 0.0
    height = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if height <= 0.0:
        return 0.0
    return width * height


def iou(a: Box, b: Box) -> float:
    """Intersection over union. Defined as 0 when the union has zero area."""
    inter = intersection_area(a, b)
    union = area(a) + area(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def dice(a: Box, b: Box) -> float:
    """Dice coefficient 2|A∩B| / (|A| + |B|). Zero when both boxes are degenerate."""
    denom = area(a) + area(b)
    if denom <= 0.0:
        return 0.0
    return 2.0 * intersection_area(a, b) / denom
