"""Deterministic blob detector for high-contrast synthetic targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import PreconditionError
from ..geometry import ImagePoint
from .types import BoundingBox, Detection

# 4-connectivity
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class FiducialConfig:
    threshold: float = 128.0
    min_area: int = 20


def detect_fiducial(frame, cfg: FiducialConfig = FiducialConfig()) -> list[Detection]:
    """Threshold, label 4-connected blobs, one detection per blob.

    Boxes are inclusive pixel extents, so a single pixel gives a zero-size
    box; such blobs are always below any useful ``min_area`` but are
    skipped regardless. Output is ordered by ``x_min`` (then ``y_min``).
    """
    img = np.asarray(frame)
    if img.ndim != 2:
        raise PreconditionError("expected a grayscale raster")
    hi = 255.0 if img.dtype == np.uint8 else max(float(img.max(initial=0.0)), 1.0)
    if not (0.0 <= cfg.threshold <= hi):
        raise PreconditionError(f"threshold {cfg.threshold} outside intensity range")
    mask = img >= cfg.threshold
    labels, n = ndimage.label(mask, structure=_CROSS)
    if n == 0:
        return []
    idx = np.arange(1, n + 1)
    areas = ndimage.sum_labels(mask, labels, idx)
    centroids = ndimage.center_of_mass(mask, labels, idx)
    out = []
    for sl, area, (cy, cx) in zip(ndimage.find_objects(labels), areas, centroids):
        if area < cfg.min_area:
            continue
        ys, xs = sl
        x0, x1, y0, y1 = xs.start, xs.stop - 1, ys.start, ys.stop - 1
        if x1 <= x0 or y1 <= y0:
            continue
        fill = float(area) / ((x1 - x0 + 1) * (y1 - y0 + 1))
        bbox = BoundingBox(float(x0), float(y0), float(x1), float(y1))
        out.append(Detection("fiducial", fill, bbox, ImagePoint(float(cx), float(cy))))
    out.sort(key=lambda d: (d.bbox.x_min, d.bbox.y_min))
    return out
