"""Stereo rectification and the four per-pixel remap tables.

``rot_left``/``rot_right`` map original camera coordinates into the
rectified camera frames. Both rectified cameras share one zero-distortion
intrinsics, so corresponding points land on the same image row and the
horizontal offset between them is the stereo disparity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, PreconditionError, ZeroBaseline
from .geometry import CameraIntrinsics, ImagePoint, StereoRig, distort_normalized, matrix_to_rotvec, orthonormalize, rotvec_to_matrix, undistort_normalized

SENTINEL = -1.0


@dataclass(frozen=True, eq=False)
class RectifiedRig:
    rot_left: np.ndarray
    rot_right: np.ndarray
    new_intrinsics: CameraIntrinsics
    baseline: float
    image_size: tuple[int, int] = (640, 480)

    def __post_init__(self):
        for name in ("rot_left", "rot_right"):
            R = np.array(getattr(self, name), dtype=float).reshape(3, 3)
            if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or np.linalg.det(R) < 0:
                raise PreconditionError(f"{name} is not a rotation")
            object.__setattr__(self, name, R)
        if not self.baseline > 0:
            raise ZeroBaseline("rectified baseline must be positive")
        if self.new_intrinsics.has_distortion:
            raise PreconditionError("rectified intrinsics must be distortion-free")


def compute_rectification(rig: StereoRig) -> RectifiedRig:
    """Bouguet-style rectification of a calibrated rig.

    The relative rotation is split in half between the two cameras, then
    both are turned so the new x-axis runs along the baseline. The shared
    intrinsics average the two focal lengths and place the principal point
    midway between the two original principal points.
    """
    T = rig.stereo.translation
    baseline = float(np.linalg.norm(T))
    if baseline <= 1e-12:
        raise ZeroBaseline("stereo translation is zero")
    half = rotvec_to_matrix(-0.5 * matrix_to_rotvec(rig.stereo.rotation))
    t = half @ T
    axis_dir = np.array([1.0 if t[0] > 0 else -1.0, 0.0, 0.0])
    w = np.cross(t, axis_dir)
    nw = np.linalg.norm(w)
    if nw > 1e-15:
        angle = np.arccos(np.clip(abs(t[0]) / np.linalg.norm(t), -1.0, 1.0))
        align = rotvec_to_matrix(w / nw * angle)
    else:
        align = np.eye(3)
    rot_left = orthonormalize(align @ half.T)
    rot_right = orthonormalize(align @ half)
    L, R = rig.left, rig.right
    new = CameraIntrinsics((L.fx + R.fx) / 2, (L.fy + R.fy) / 2, (L.cx + R.cx) / 2, (L.cy + R.cy) / 2)
    return RectifiedRig(rot_left, rot_right, new, baseline, tuple(rig.image_size))


@dataclass(frozen=True, eq=False)
class RemapTable:
    """Source coordinates per destination pixel; ``SENTINEL`` marks unmapped pixels."""

    map_x: np.ndarray
    map_y: np.ndarray

    def __post_init__(self):
        mx = np.asarray(self.map_x, dtype=np.float32)
        my = np.asarray(self.map_y, dtype=np.float32)
        if mx.shape != my.shape or mx.ndim != 2:
            raise DimensionMismatch("map_x and map_y must be 2-D with equal shapes")
        object.__setattr__(self, "map_x", mx)
        object.__setattr__(self, "map_y", my)

    @property
    def width(self) -> int:
        return self.map_x.shape[1]

    @property
    def height(self) -> int:
        return self.map_x.shape[0]

    @classmethod
    def identity(cls, width: int, height: int) -> RemapTable:
        r, c = np.mgrid[0:height, 0:width]
        return cls(c.astype(np.float32), r.astype(np.float32))

    @cached_property
    def _gather(self):
        """Four flat source indices and bilinear weights per pixel, computed once per table."""
        h, w = self.map_x.shape
        mx = self.map_x.astype(np.float64)
        my = self.map_y.astype(np.float64)
        valid = (mx >= 0) & (my >= 0) & (mx <= w - 1) & (my <= h - 1)
        mx = np.where(valid, mx, 0.0)
        my = np.where(valid, my, 0.0)
        x0 = np.clip(np.floor(mx), 0, max(w - 2, 0)).astype(np.intp)
        y0 = np.clip(np.floor(my), 0, max(h - 2, 0)).astype(np.intp)
        fx = mx - x0
        fy = my - y0
        base = (y0 * w + x0).ravel()
        dx = 1 if w > 1 else 0
        dy = w if h > 1 else 0
        idx = np.stack([base, base + dx, base + dy, base + dx + dy])
        wts = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy]).reshape(4, -1)
        wts[:, ~valid.ravel()] = 0.0
        return idx, wts, wts.astype(np.float32)


def _rect_to_source(rect: RectifiedRig, R: np.ndarray, orig: CameraIntrinsics, u, v):
    """Map rectified pixel coordinates to original (distorted) pixel coordinates."""
    K = rect.new_intrinsics
    rays = np.stack([(u - K.cx) / K.fx, (v - K.cy) / K.fy, np.ones_like(u)], axis=-1)
    cam = rays @ R  # R.T applied to each ray
    z = cam[..., 2]
    front = z > 0
    zs = np.where(front, z, 1.0)
    xy = cam[..., :2] / zs[..., None]
    xyd = distort_normalized(orig.dist, xy)
    sx = orig.fx * xyd[..., 0] + orig.cx
    sy = orig.fy * xyd[..., 1] + orig.cy
    return sx, sy, front


def build_remap_tables(rect: RectifiedRig, left: CameraIntrinsics, right: CameraIntrinsics, size=None):
    """Inverse-mapping tables (left, right) for frames of ``size`` = (width, height)."""
    w, h = size if size is not None else rect.image_size
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    tables = []
    for R, orig in ((rect.rot_left, left), (rect.rot_right, right)):
        sx, sy, front = _rect_to_source(rect, R, orig, u, v)
        ok = front & np.isfinite(sx) & np.isfinite(sy) & (sx >= 0) & (sy >= 0) & (sx <= w - 1) & (sy <= h - 1)
        mx = np.where(ok, sx, SENTINEL).astype(np.float32)
        my = np.where(ok, sy, SENTINEL).astype(np.float32)
        # float32 rounding can push an in-range value just past the border
        bad = ok & ((mx > w - 1) | (my > h - 1))
        mx[bad] = SENTINEL
        my[bad] = SENTINEL
        tables.append(RemapTable(mx, my))
    return tables[0], tables[1]


def remap(image, table: RemapTable) -> np.ndarray:
    """Bilinear resampling through ``table``; unmapped pixels become 0.

    uint8 input yields uint8 output (rounded half up); other inputs yield
    float64.
    """
    img = np.asarray(image)
    if img.shape[:2] != table.map_x.shape:
        raise DimensionMismatch(f"image {img.shape[:2]} vs table {table.map_x.shape}")
    idx, w64, w32 = table._gather
    h, w = table.map_x.shape
    if img.dtype == np.uint8 and img.ndim == 2:
        flat = img.reshape(-1).astype(np.float32)
        out = w32[0] * flat[idx[0]]
        for k in range(1, 4):
            out += w32[k] * flat[idx[k]]
        out += 0.5
        np.floor(out, out=out)
        np.clip(out, 0, 255, out=out)
        return out.astype(np.uint8).reshape(h, w)
    work, wts = (np.float32, w32) if img.dtype == np.uint8 else (np.float64, w64)
    flat = img.reshape(h * w, -1).astype(work, copy=False)
    out = sum(wts[k][:, None] * flat[idx[k]] for k in range(4)).reshape(img.shape)
    if img.dtype == np.uint8:
        return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return out


def rectify_points(points, original: CameraIntrinsics, R: np.ndarray, rect: RectifiedRig) -> list[ImagePoint]:
    """Map observed (distorted) pixels into the rectified image."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    xyd = np.column_stack([(p[:, 0] - original.cx) / original.fx, (p[:, 1] - original.cy) / original.fy])
    xy = undistort_normalized(original.dist, xyd) if original.has_distortion else xyd
    rays = np.column_stack([xy, np.ones(len(xy))]) @ R.T
    K = rect.new_intrinsics
    u = K.fx * rays[:, 0] / rays[:, 2] + K.cx
    v = K.fy * rays[:, 1] / rays[:, 2] + K.cy
    return [ImagePoint(float(a), float(b)) for a, b in zip(u, v)]
