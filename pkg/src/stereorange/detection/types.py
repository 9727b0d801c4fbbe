from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import PreconditionError
from ..geometry import ImagePoint


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise PreconditionError(f"degenerate box {self}")

    @property
    def center(self) -> ImagePoint:
        return ImagePoint((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def clamped(self, width: int, height: int) -> BoundingBox:
        return BoundingBox(
            min(max(self.x_min, 0.0), width - 1),
            min(max(self.y_min, 0.0), height - 1),
            min(max(self.x_max, 0.0), width - 1),
            min(max(self.y_max, 0.0), height - 1),
        )

    def shifted(self, dx: float, dy: float) -> BoundingBox:
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)


@dataclass(frozen=True)
class Detection:
    """One detected object.

    ``center`` defaults to the box midpoint. The fiducial detector overrides
    it with the blob centroid, which is the better ranging point for
    rasterized round targets.
    """

    label: str
    confidence: float
    bbox: BoundingBox
    center: ImagePoint | None = None

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0) or math.isnan(self.confidence):
            raise PreconditionError(f"confidence {self.confidence} outside [0, 1]")
        if self.center is None:
            object.__setattr__(self, "center", self.bbox.center)
        else:
            object.__setattr__(self, "center", ImagePoint(float(self.center[0]), float(self.center[1])))


@dataclass(frozen=True)
class StereoDetectionPair:
    left: Detection
    right: Detection

    @property
    def disparity(self) -> float:
        return self.left.center.x - self.right.center.x

    @property
    def row_offset(self) -> float:
        return self.left.center.y - self.right.center.y

    @property
    def label(self) -> str:
        return self.left.label
