"""Synthetic stereo renderer used as a ground-truth oracle.

Targets are planar shapes parallel to the left camera's image plane, given
in left-camera coordinates (cm). Each target boundary is sampled, projected
through each camera with full distortion, and filled by scanline
rasterization with one sample per pixel center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration.stereo import BoardSpec, Camera, CornerObservation
from .errors import FormatError, PointBehindCamera, PreconditionError, TargetBehindCamera
from .geometry import CameraIntrinsics, ImagePoint, Pose, StereoRig, project_points, rotvec_to_matrix

DISC_SIDES = 64
RECT_EDGE_SAMPLES = 16


@dataclass(frozen=True)
class SyntheticTarget:
    shape: str  # "rectangle" | "disc"
    center: tuple[float, float, float]
    size: tuple[float, ...]  # (width, height) or (radius,)
    intensity: int = 255

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "size", tuple(float(s) for s in self.size))
        if self.shape == "disc":
            if len(self.size) != 1:
                raise PreconditionError("disc takes one size (radius)")
        elif self.shape == "rectangle":
            if len(self.size) != 2:
                raise PreconditionError("rectangle takes two sizes (width, height)")
        else:
            raise PreconditionError(f"unknown shape {self.shape!r}")
        if any(s <= 0 for s in self.size):
            raise PreconditionError("target extents must be positive")
        if not 0 <= self.intensity <= 255:
            raise PreconditionError("intensity must be in [0, 255]")

    @classmethod
    def disc(cls, x, y, z, radius, intensity=255):
        return cls("disc", (x, y, z), (radius,), intensity)

    @classmethod
    def rectangle(cls, x, y, z, width, height, intensity=255):
        return cls("rectangle", (x, y, z), (width, height), intensity)

    def boundary(self) -> np.ndarray:
        cx, cy, cz = self.center
        if self.shape == "disc":
            a = np.arange(DISC_SIDES) * (2 * math.pi / DISC_SIDES)
            r = self.size[0]
            return np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a), np.full(DISC_SIDES, cz)])
        hw, hh = self.size[0] / 2, self.size[1] / 2
        s = np.linspace(0.0, 1.0, RECT_EDGE_SAMPLES, endpoint=False)
        corners = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
        pts = []
        for (ax, ay), (bx, by) in zip(corners, corners[1:] + corners[:1]):
            pts.append(np.column_stack([ax + s * (bx - ax), ay + s * (by - ay)]))
        xy = np.vstack(pts)
        return np.column_stack([cx + xy[:, 0], cy + xy[:, 1], np.full(len(xy), cz)])


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    rig: StereoRig
    targets: tuple[SyntheticTarget, ...] = ()
    background: int = 0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        w, h = self.rig.image_size
        if w < 32 or h < 32:
            raise PreconditionError("image size must be at least 32x32")
        if not 0 <= self.background <= 255:
            raise PreconditionError("background must be in [0, 255]")

    @property
    def image_size(self) -> tuple[int, int]:
        return self.rig.image_size


@dataclass(frozen=True)
class TargetTruth:
    depth: float
    left: ImagePoint
    right: ImagePoint

    @property
    def disparity(self) -> float:
        return self.left.x - self.right.x


@dataclass(frozen=True)
class GroundTruth:
    targets: tuple[TargetTruth, ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.targets)


def fill_polygon(img: np.ndarray, poly: np.ndarray, value: int) -> None:
    """Scanline fill; a pixel is set when its center lies inside (half-open rule)."""
    h, w = img.shape
    y = poly[:, 1]
    r0 = max(math.ceil(y.min()), 0)
    r1 = min(math.floor(y.max()), h - 1)
    if r1 < r0:
        return
    rows = np.arange(r0, r1 + 1, dtype=float)[:, None]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    crosses = ((y0 <= rows) & (rows < y1)) | ((y1 <= rows) & (rows < y0))
    dy = np.where(y1 != y0, y1 - y0, 1.0)
    xs = np.where(crosses, x0 + (rows - y0) * (x1 - x0) / dy, np.inf)
    xs.sort(axis=1)
    counts = crosses.sum(axis=1)
    for i, k in enumerate(counts):
        r = r0 + i
        row_x = xs[i, :k]
        for j in range(0, k - 1, 2):
            c0 = max(math.ceil(row_x[j]), 0)
            c1 = min(math.ceil(row_x[j + 1]) - 1, w - 1)
            if c1 >= c0:
                img[r, c0 : c1 + 1] = value


def _camera_views(rig: StereoRig):
    return ((rig.left, Pose.identity()), (rig.right, rig.stereo))


def render_stereo(scene: SyntheticScene) -> tuple[np.ndarray, np.ndarray, GroundTruth]:
    """Render (left, right, truth). Images are uint8 with shape (h, w)."""
    w, h = scene.image_size
    images = []
    for intr, pose in _camera_views(scene.rig):
        img = np.full((h, w), scene.background, dtype=np.uint8)
        layers = []
        for t in scene.targets:
            pts = t.boundary()
            cam_pts = pose.apply(np.vstack([pts, np.array(t.center)[None]]))
            if np.any(cam_pts[:, 2] <= 0):
                raise TargetBehindCamera(f"target at {t.center} is not in front of both cameras")
            layers.append((cam_pts[-1, 2], project_points(intr, pose, pts), t.intensity))
        # far targets first so nearer ones overwrite them
        for _, poly, value in sorted(layers, key=lambda item: -item[0]):
            fill_polygon(img, poly, value)
        images.append(img)
    truth = []
    for t in scene.targets:
        c = np.array(t.center)[None]
        ul = project_points(scene.rig.left, Pose.identity(), c)[0]
        ur = project_points(scene.rig.right, scene.rig.stereo, c)[0]
        truth.append(TargetTruth(float(t.center[2]), ImagePoint(*map(float, ul)), ImagePoint(*map(float, ur))))
    return images[0], images[1], GroundTruth(tuple(truth))


# --- calibration-board observations -----------------------------------------


def board_view_poses(board: BoardSpec, n_views: int, distance: float = 60.0, seed: int = 0) -> list[Pose]:
    """Varied board->left-camera poses with the board roughly centered in view."""
    rng = np.random.default_rng(seed)
    half = np.array([(board.inner_cols - 1) * board.square_size / 2, (board.inner_rows - 1) * board.square_size / 2, 0])
    poses = []
    for k in range(n_views):
        tilt = np.radians([rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-15, 15)])
        # guarantee a spread of orientations even for small n
        tilt[k % 2] = np.radians(20 + 10 * (k % 3)) * (1 if k % 4 < 2 else -1)
        R = rotvec_to_matrix(tilt)
        center = np.array([rng.uniform(-4, 4), rng.uniform(-3, 3), distance * rng.uniform(0.85, 1.2)])
        poses.append(Pose(R, center - R @ half))
    return poses


def board_observations(
    rig: StereoRig,
    board: BoardSpec,
    view_poses,
    noise_px: float = 0.0,
    seed: int = 0,
) -> list[CornerObservation]:
    """Project board corners into both cameras; optional Gaussian pixel noise."""
    rng = np.random.default_rng(seed)
    P = board.object_points()
    w, h = rig.image_size
    out = []
    for vid, pose in enumerate(view_poses):
        for cam, intr, p in ((Camera.LEFT, rig.left, pose), (Camera.RIGHT, rig.right, rig.stereo.compose(pose))):
            try:
                uv = project_points(intr, p, P)
            except PointBehindCamera:
                raise PreconditionError(f"board view {vid} is behind camera {cam.value}") from None
            if noise_px > 0:
                uv = uv + rng.normal(0.0, noise_px, uv.shape)
            if np.any(uv < 0) or np.any(uv[:, 0] > w - 1) or np.any(uv[:, 1] > h - 1):
                raise PreconditionError(f"board view {vid} leaves the frame of camera {cam.value}")
            out.append(CornerObservation(vid, cam, uv))
    return out


# --- scene files ----------------------------------------------------------------


def _floats(parts, n, lineno):
    if len(parts) != n:
        raise FormatError(f"expected {n} values, got {len(parts)}", line=lineno)
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise FormatError(str(exc), line=lineno) from None


def read_scene(path) -> SyntheticScene:
    """Parse a scene file.

    Header keys: ``image W H``, ``background B``, ``left``/``right`` followed
    by ``fx fy cx cy k1 k2 p1 p2 k3``, ``stereo rx ry rz tx ty tz`` (axis-angle
    radians and cm, left->right). Targets: ``disc cx cy cz radius intensity``
    or ``rectangle cx cy cz width height intensity``.
    """
    size = None
    background = 0
    cams: dict = {}
    stereo = None
    targets = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        try:
            if key == "image":
                w, h = _floats(rest, 2, lineno)
                size = (int(w), int(h))
            elif key == "background":
                background = int(_floats(rest, 1, lineno)[0])
            elif key in ("left", "right"):
                cams[key] = CameraIntrinsics.from_array(_floats(rest, 9, lineno))
            elif key == "stereo":
                v = _floats(rest, 6, lineno)
                stereo = Pose(rotvec_to_matrix(v[:3]), v[3:])
            elif key == "disc":
                x, y, z, r, i = _floats(rest, 5, lineno)
                targets.append(SyntheticTarget.disc(x, y, z, r, int(i)))
            elif key == "rectangle":
                x, y, z, wd, ht, i = _floats(rest, 6, lineno)
                targets.append(SyntheticTarget.rectangle(x, y, z, wd, ht, int(i)))
            else:
                raise FormatError(f"unknown key {key!r}", line=lineno)
        except PreconditionError as exc:
            raise FormatError(str(exc), line=lineno) from None
    for name, val in (("image", size), ("left", cams.get("left")), ("right", cams.get("right")), ("stereo", stereo)):
        if val is None:
            raise FormatError(f"scene file lacks {name!r} header", node=name)
    rig = StereoRig(cams["left"], cams["right"], stereo, size)
    return SyntheticScene(rig, tuple(targets), background)


def write_scene(path, scene: SyntheticScene) -> None:
    rig = scene.rig
    fmt = lambda vals: " ".join(repr(float(v)) for v in vals)  # noqa: E731
    lines = [
        f"image {rig.image_size[0]} {rig.image_size[1]}",
        f"background {scene.background}",
        f"left {fmt(rig.left.as_array())}",
        f"right {fmt(rig.right.as_array())}",
        f"stereo {fmt(rig.stereo.rvec)} {fmt(rig.stereo.translation)}",
    ]
    for t in scene.targets:
        lines.append(f"{t.shape} {fmt(t.center)} {fmt(t.size)} {t.intensity}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_truth(path, truth: GroundTruth) -> None:
    lines = ["# target depth_cm left_x left_y right_x right_y"]
    for i, t in enumerate(truth.targets):
        lines.append(f"{i} {t.depth!r} {t.left.x!r} {t.left.y!r} {t.right.x!r} {t.right.y!r}")
    Path(path).write_text("\n".join(lines) + "\n")
