"""Disparity and triangulated depth for matched stereo detections."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .detection.types import StereoDetectionPair
from .errors import DisparityTooSmall, InvalidFov, PreconditionError


@dataclass(frozen=True)
class RangingConfig:
    baseline: float = 9.0  # cm
    focal_length: float = 3.6  # mm; informational, f_pixel comes from alpha
    alpha: float = 60.0  # horizontal field of view, degrees
    frame_width: int = 640
    min_disparity: float = 0.5

    def __post_init__(self):
        if not self.baseline > 0:
            raise PreconditionError("baseline must be positive")
        if self.frame_width < 2:
            raise PreconditionError("frame_width must be >= 2")
        if not self.min_disparity > 0:
            raise PreconditionError("min_disparity must be positive")


@dataclass(frozen=True)
class DepthEstimate:
    disparity: float
    f_pixel: float
    depth: float
    pair: StereoDetectionPair | None = None


def focal_mm_to_pixels(cfg: RangingConfig) -> float:
    """Focal length in pixels from the horizontal field of view."""
    if not 0.0 < cfg.alpha < 180.0:
        raise InvalidFov(f"alpha={cfg.alpha} outside (0, 180)")
    return (cfg.frame_width * 0.5) / math.tan(math.radians(cfg.alpha) * 0.5)


def disparity(x_left: float, x_right: float) -> float:
    return x_left - x_right


def depth_from_disparity(d: float, baseline: float, f_pixel: float, min_disparity: float = 0.5) -> float:
    if not abs(d) >= min_disparity:
        raise DisparityTooSmall(f"|disparity| {abs(d):.4g} px below {min_disparity} px")
    return abs(baseline * f_pixel / d)


def find_depth(pair: StereoDetectionPair, cfg: RangingConfig, f_pixel: float | None = None) -> DepthEstimate:
    """Depth in cm of a matched pair from its center disparity.

    ``f_pixel`` overrides the field-of-view conversion, e.g. with the
    rectified focal length of a calibrated rig.
    """
    fp = focal_mm_to_pixels(cfg) if f_pixel is None else float(f_pixel)
    d = disparity(pair.left.center.x, pair.right.center.x)
    return DepthEstimate(d, fp, depth_from_disparity(d, cfg.baseline, fp, cfg.min_disparity), pair)
