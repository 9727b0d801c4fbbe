"""Pinhole camera with 5-coefficient Brown-Conrady distortion.

Conventions: camera frame is x right, y down, z forward. Pixel (col, row)
has its center at integer coordinates (col, row). World units are
centimeters. A ``Pose`` maps world coordinates into the camera frame,
``X_cam = R @ X_world + t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import NonConvergent, PointBehindCamera, PreconditionError

UNDISTORT_MAX_ITER = 20
UNDISTORT_TOL = 1e-9


class ImagePoint(NamedTuple):
    x: float
    y: float


class WorldPoint(NamedTuple):
    X: float
    Y: float
    Z: float


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    dist: tuple[float, float, float, float, float] = (0.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "dist", tuple(float(d) for d in self.dist))
        if len(self.dist) != 5:
            raise PreconditionError("dist must hold (k1, k2, p1, p2, k3)")
        vals = (self.fx, self.fy, self.cx, self.cy, *self.dist)
        if not all(math.isfinite(v) for v in vals):
            raise PreconditionError("intrinsics must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise PreconditionError("focal lengths must be positive")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def has_distortion(self) -> bool:
        return any(d != 0.0 for d in self.dist)

    def check_frame(self, width: int, height: int) -> None:
        if not (0 <= self.cx <= 2 * width and 0 <= self.cy <= 2 * height):
            raise PreconditionError("principal point outside twice the frame extent")

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.cx, self.cy, *self.dist])

    @classmethod
    def from_array(cls, a) -> CameraIntrinsics:
        a = [float(v) for v in a]
        return cls(a[0], a[1], a[2], a[3], tuple(a[4:9]))


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (SVD projection, det forced to +1)."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def rotvec_to_matrix(rvec) -> np.ndarray:
    return Rotation.from_rotvec(np.asarray(rvec, dtype=float)).as_matrix()


def matrix_to_rotvec(R: np.ndarray) -> np.ndarray:
    return Rotation.from_matrix(R).as_rotvec()


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True, eq=False)
class Pose:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise PreconditionError("pose must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or np.linalg.det(R) < 0:
            raise PreconditionError("rotation must be orthonormal with det +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_rvec(cls, rvec, tvec) -> Pose:
        return cls(rotvec_to_matrix(rvec), tvec)

    @property
    def rvec(self) -> np.ndarray:
        return matrix_to_rotvec(self.rotation)

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def compose(self, other: Pose) -> Pose:
        """``self ∘ other``: apply ``other`` first."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> Pose:
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def __repr__(self):
        return f"Pose(rvec={self.rvec.round(6).tolist()}, t={self.translation.round(6).tolist()})"


@dataclass(frozen=True, eq=False)
class StereoRig:
    """Two cameras; the world frame is the left camera frame.

    ``stereo`` maps left-camera coordinates to right-camera coordinates.
    """

    left: CameraIntrinsics
    right: CameraIntrinsics
    stereo: Pose
    image_size: tuple[int, int] = (640, 480)

    @property
    def baseline(self) -> float:
        return float(np.linalg.norm(self.stereo.translation))

    @classmethod
    def rectified(cls, f_pixel: float, baseline: float, image_size=(640, 480), cx=None, cy=None) -> StereoRig:
        """Ideal parallel rig with the right camera ``baseline`` cm along +X."""
        w, h = image_size
        intr = CameraIntrinsics(f_pixel, f_pixel, w / 2 if cx is None else cx, h / 2 if cy is None else cy)
        return cls(intr, intr, Pose(np.eye(3), [-baseline, 0.0, 0.0]), tuple(image_size))


def distort_normalized(dist, xy: np.ndarray) -> np.ndarray:
    k1, k2, p1, p2, k3 = dist
    x = xy[..., 0]
    y = xy[..., 1]
    r2 = x * x + y * y
    radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    return np.stack([xd, yd], axis=-1)


def project_points(intr: CameraIntrinsics, pose: Pose, points) -> np.ndarray:
    """Vectorized ``project`` over an (N, 3) array; returns (N, 2)."""
    pc = pose.apply(np.atleast_2d(points))
    z = pc[:, 2]
    if np.any(z <= 0):
        raise PointBehindCamera(f"{int(np.sum(z <= 0))} point(s) with camera-frame Z <= 0")
    xy = pc[:, :2] / z[:, None]
    xyd = distort_normalized(intr.dist, xy)
    return np.column_stack([intr.fx * xyd[:, 0] + intr.cx, intr.fy * xyd[:, 1] + intr.cy])


def project(intr: CameraIntrinsics, pose: Pose, p) -> ImagePoint:
    uv = project_points(intr, pose, np.asarray(p, dtype=float).reshape(1, 3))[0]
    return ImagePoint(float(uv[0]), float(uv[1]))


def undistort_normalized(dist, xyd: np.ndarray) -> np.ndarray:
    """Invert ``distort_normalized`` by fixed-point iteration (vectorized)."""
    k1, k2, p1, p2, k3 = dist
    xyd = np.asarray(xyd, dtype=float)
    xy = xyd.copy()
    for _ in range(UNDISTORT_MAX_ITER):
        x = xy[..., 0]
        y = xy[..., 1]
        r2 = x * x + y * y
        radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
        dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
        nxt = np.stack([(xyd[..., 0] - dx) / radial, (xyd[..., 1] - dy) / radial], axis=-1)
        step = np.max(np.abs(nxt - xy)) if nxt.size else 0.0
        xy = nxt
        if not np.isfinite(step):
            break
        if step < UNDISTORT_TOL:
            return xy
    raise NonConvergent("undistortion did not converge in 20 iterations")


def undistort_point(intr: CameraIntrinsics, p) -> ImagePoint:
    """Ideal (distortion-free) pixel for an observed pixel ``p``."""
    u, v = float(p[0]), float(p[1])
    if not (math.isfinite(u) and math.isfinite(v)):
        raise PreconditionError("point must be finite")
    if not intr.has_distortion:
        return ImagePoint(u, v)
    xyd = np.array([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy])
    x, y = undistort_normalized(intr.dist, xyd)
    return ImagePoint(float(intr.fx * x + intr.cx), float(intr.fy * y + intr.cy))
