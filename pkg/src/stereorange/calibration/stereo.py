"""Joint stereo calibration: initialization and Levenberg-Marquardt refinement."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import EmptyInput, NonConvergent, PreconditionError
from ..geometry import CameraIntrinsics, ImagePoint, Pose, distort_normalized, orthonormalize, rotvec_to_matrix
from .homography import estimate_homography, init_intrinsics, pose_from_homography

logger = logging.getLogger(__name__)

LM_LAMBDA0 = 1e-3
LM_MAX_ITER = 200
LM_LAMBDA_MIN = 1e-15  # keeps x10 on rejection meaningful
LM_GTOL = 1e-8
LM_MIN_GAIN = 0.25  # accepted steps must realize this share of the predicted decrease
# relative cost decrease below which float64 cannot tell accepted from rejected steps
COST_FLOOR = 16 * np.finfo(float).eps


class Camera(str, Enum):
    LEFT = "L"
    RIGHT = "R"

    @classmethod
    def parse(cls, s: str) -> Camera:
        key = s.strip().upper()
        if key in ("L", "LEFT"):
            return cls.LEFT
        if key in ("R", "RIGHT"):
            return cls.RIGHT
        raise PreconditionError(f"unknown camera {s!r}")


@dataclass(frozen=True)
class BoardSpec:
    inner_rows: int
    inner_cols: int
    square_size: float

    def __post_init__(self):
        if self.inner_rows < 2 or self.inner_cols < 2:
            raise PreconditionError("board needs at least 2x2 inner corners")
        if not self.square_size > 0:
            raise PreconditionError("square_size must be positive")

    @property
    def n_corners(self) -> int:
        return self.inner_rows * self.inner_cols

    def object_points(self) -> np.ndarray:
        """Board-frame corner coordinates (cm), row-major, Z = 0."""
        r, c = np.mgrid[0 : self.inner_rows, 0 : self.inner_cols]
        s = self.square_size
        return np.column_stack([c.ravel() * s, r.ravel() * s, np.zeros(self.n_corners)])


@dataclass(frozen=True, eq=False)
class CornerObservation:
    view_id: int
    camera: Camera
    corners: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.corners, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "corners", pts)
        object.__setattr__(self, "camera", Camera(self.camera))

    def check(self, board: BoardSpec, frame_size=None) -> None:
        if len(self.corners) != board.n_corners:
            raise PreconditionError(
                f"view {self.view_id}/{self.camera.value}: {len(self.corners)} corners, expected {board.n_corners}"
            )
        if frame_size is not None:
            w, h = frame_size
            c = self.corners
            if np.any(c < 0) or np.any(c[:, 0] > w - 1) or np.any(c[:, 1] > h - 1):
                raise PreconditionError(f"view {self.view_id}/{self.camera.value}: corner outside frame")


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    left: CameraIntrinsics
    right: CameraIntrinsics
    view_poses: dict  # (view_id, Camera) -> Pose
    stereo: Pose
    rms_reprojection: float
    iterations: int = 0
    cost_history: tuple = field(default_factory=tuple)

    @property
    def baseline(self) -> float:
        return float(np.linalg.norm(self.stereo.translation))

    def view_ids(self) -> list[int]:
        return sorted({v for v, _ in self.view_poses})


def solve_stereo_extrinsics(left_poses, right_poses) -> Pose:
    """Average per-view relative pose of the right camera w.r.t. the left."""
    if len(left_poses) == 0:
        raise EmptyInput("no poses")
    if len(left_poses) != len(right_poses):
        raise PreconditionError("pose lists differ in length")
    rel = []
    for pl, pr in zip(left_poses, right_poses):
        R = pr.rotation @ pl.rotation.T
        rel.append((orthonormalize(R), pr.translation - R @ pl.translation))
    if len(rel) == 1:
        return Pose(*rel[0])
    quats = Rotation.from_matrix(np.array([R for R, _ in rel])).as_quat()
    ref = quats[0]
    quats = np.where((quats @ ref)[:, None] < 0, -quats, quats)
    q = quats.mean(axis=0)
    q /= np.linalg.norm(q)
    t = np.mean([t for _, t in rel], axis=0)
    return Pose(orthonormalize(Rotation.from_quat(q).as_matrix()), t)


def _project_with_jac(intr: np.ndarray, pc: np.ndarray):
    """Pixel projection of camera-frame points plus Jacobians.

    Returns (uv (N,2), d_uv/d_intr (N,2,9), d_uv/d_pc (N,2,3)).
    """
    fx, fy, cx, cy, k1, k2, p1, p2, k3 = intr
    X, Y, Z = pc[:, 0], pc[:, 1], pc[:, 2]
    iz = 1.0 / Z
    x, y = X * iz, Y * iz
    r2 = x * x + y * y
    r4 = r2 * r2
    r6 = r4 * r2
    rad = 1.0 + k1 * r2 + k2 * r4 + k3 * r6
    drad = k1 + 2.0 * k2 * r2 + 3.0 * k3 * r4  # d rad / d r2
    xd = x * rad + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x)
    yd = y * rad + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y
    n = len(pc)
    uv = np.column_stack([fx * xd + cx, fy * yd + cy])

    Ji = np.zeros((n, 2, 9))
    Ji[:, 0, 0] = xd
    Ji[:, 1, 1] = yd
    Ji[:, 0, 2] = 1.0
    Ji[:, 1, 3] = 1.0
    Ji[:, 0, 4] = fx * x * r2
    Ji[:, 1, 4] = fy * y * r2
    Ji[:, 0, 5] = fx * x * r4
    Ji[:, 1, 5] = fy * y * r4
    Ji[:, 0, 6] = fx * 2.0 * x * y
    Ji[:, 1, 6] = fy * (r2 + 2.0 * y * y)
    Ji[:, 0, 7] = fx * (r2 + 2.0 * x * x)
    Ji[:, 1, 7] = fy * 2.0 * x * y
    Ji[:, 0, 8] = fx * x * r6
    Ji[:, 1, 8] = fy * y * r6

    dxd_dx = rad + 2.0 * x * x * drad + 2.0 * p1 * y + 6.0 * p2 * x
    dxd_dy = 2.0 * x * y * drad + 2.0 * p1 * x + 2.0 * p2 * y
    dyd_dx = 2.0 * x * y * drad + 2.0 * p1 * x + 2.0 * p2 * y
    dyd_dy = rad + 2.0 * y * y * drad + 6.0 * p1 * y + 2.0 * p2 * x
    # d(x, y)/d(X, Y, Z)
    Jn = np.zeros((n, 2, 3))
    Jn[:, 0, 0] = iz
    Jn[:, 0, 2] = -x * iz
    Jn[:, 1, 1] = iz
    Jn[:, 1, 2] = -y * iz
    Jd = np.empty((n, 2, 2))
    Jd[:, 0, 0] = fx * dxd_dx
    Jd[:, 0, 1] = fx * dxd_dy
    Jd[:, 1, 0] = fy * dyd_dx
    Jd[:, 1, 1] = fy * dyd_dy
    return uv, Ji, Jd @ Jn


class _Problem:
    """Parameter layout: [left 9 | right 9 | stereo rot 3, t 3 | view_k rot 3, t 3 ...]."""

    def __init__(self, board: BoardSpec, obs_by_view: dict):
        self.P = board.object_points()
        self.view_ids = sorted(obs_by_view)
        self.obs_l = [obs_by_view[v][Camera.LEFT] for v in self.view_ids]
        self.obs_r = [obs_by_view[v][Camera.RIGHT] for v in self.view_ids]
        self.n_pts = len(self.P)
        self.n_params = 24 + 6 * len(self.view_ids)
        self.pixel_scale = float(max(np.abs(np.vstack(self.obs_l + self.obs_r)).max(), 1.0))

    def residuals(self, st, with_jac=False):
        il, ir, Rs, ts, Rv, tv = st
        n = self.n_pts
        nv = len(self.view_ids)
        res = np.empty(nv * 4 * n)
        J = np.zeros((nv * 4 * n, self.n_params)) if with_jac else None
        for k in range(nv):
            a = self.P @ Rv[k].T
            pc = a + tv[k]
            b = pc @ Rs.T
            pr = b + ts
            row = k * 4 * n
            if not with_jac:
                uvl = _project_uv(il, pc)
                uvr = _project_uv(ir, pr)
            else:
                # residuals always come from _project_uv so accepted costs are reproduced bit for bit
                uvl = _project_uv(il, pc)
                uvr = _project_uv(ir, pr)
                _, Jil, Jpl = _project_with_jac(il, pc)
                _, Jir, Jpr = _project_with_jac(ir, pr)
                vcol = 24 + 6 * k
                # left camera rows
                J[row : row + 2 * n, 0:9] = Jil.reshape(2 * n, 9)
                J[row : row + 2 * n, vcol : vcol + 3] = np.cross(a[:, None, :], Jpl).reshape(2 * n, 3)
                J[row : row + 2 * n, vcol + 3 : vcol + 6] = Jpl.reshape(2 * n, 3)
                # right camera rows
                r0 = row + 2 * n
                JprRs = Jpr @ Rs
                J[r0 : r0 + 2 * n, 9:18] = Jir.reshape(2 * n, 9)
                J[r0 : r0 + 2 * n, 18:21] = np.cross(b[:, None, :], Jpr).reshape(2 * n, 3)
                J[r0 : r0 + 2 * n, 21:24] = Jpr.reshape(2 * n, 3)
                J[r0 : r0 + 2 * n, vcol : vcol + 3] = np.cross(a[:, None, :], JprRs).reshape(2 * n, 3)
                J[r0 : r0 + 2 * n, vcol + 3 : vcol + 6] = JprRs.reshape(2 * n, 3)
            res[row : row + 2 * n] = (uvl - self.obs_l[k]).ravel()
            res[row + 2 * n : row + 4 * n] = (uvr - self.obs_r[k]).ravel()
        return res, J

    def apply(self, st, delta):
        il, ir, Rs, ts, Rv, tv = st
        il = il + delta[0:9]
        ir = ir + delta[9:18]
        Rs = orthonormalize(rotvec_to_matrix(delta[18:21]) @ Rs)
        ts = ts + delta[21:24]
        Rv = [orthonormalize(rotvec_to_matrix(delta[24 + 6 * k : 27 + 6 * k]) @ R) for k, R in enumerate(Rv)]
        tv = [t + delta[27 + 6 * k : 30 + 6 * k] for k, t in enumerate(tv)]
        return il, ir, Rs, ts, Rv, tv


def _project_uv(intr, pc):
    xy = pc[:, :2] / pc[:, 2:3]
    xyd = distort_normalized(intr[4:9], xy)
    return np.column_stack([intr[0] * xyd[:, 0] + intr[2], intr[1] * xyd[:, 1] + intr[3]])


def _group(board: BoardSpec, obs) -> dict:
    by_view: dict = {}
    for o in obs:
        o.check(board)
        slot = by_view.setdefault(o.view_id, {})
        if o.camera in slot:
            raise PreconditionError(f"duplicate observation for view {o.view_id}/{o.camera.value}")
        slot[o.camera] = o.corners
    for v, slot in by_view.items():
        if len(slot) != 2:
            raise PreconditionError(f"view {v} lacks observations from both cameras")
    if not by_view:
        raise EmptyInput("no observations")
    return by_view


def _rms(res: np.ndarray) -> float:
    return float(np.sqrt(res @ res / (len(res) / 2)))


def refine_calibration(
    initial: CalibrationResult,
    board: BoardSpec,
    obs,
    max_iter: int = LM_MAX_ITER,
    gtol: float = LM_GTOL,
) -> CalibrationResult:
    """Minimize total squared reprojection error over both cameras.

    Free parameters: both intrinsics with all five distortion coefficients,
    the left-camera pose of every view, and one shared stereo pose. Rotation
    updates are axis-angle increments applied on the left of the current
    rotation. RMS is reported per corner (Euclidean pixel distance).
    """
    by_view = _group(board, obs)
    prob = _Problem(board, by_view)
    for v in prob.view_ids:
        if (v, Camera.LEFT) not in initial.view_poses:
            raise PreconditionError(f"no initial pose for view {v}")
    st = (
        initial.left.as_array(),
        initial.right.as_array(),
        initial.stereo.rotation.copy(),
        initial.stereo.translation.copy(),
        [initial.view_poses[(v, Camera.LEFT)].rotation.copy() for v in prob.view_ids],
        [initial.view_poses[(v, Camera.LEFT)].translation.copy() for v in prob.view_ids],
    )
    res, J = prob.residuals(st, with_jac=True)
    cost = 0.5 * res @ res
    history = [cost]
    lam = LM_LAMBDA0
    accepted = 0
    converged = False
    for it in range(max_iter):
        g = J.T @ res
        gnorm = float(np.linalg.norm(g))
        if gnorm < gtol:
            converged = True
            break
        delta = _lm_step(J, res, lam)
        cand = prob.apply(st, delta)
        new_res, _ = prob.residuals(cand)
        new_cost = 0.5 * new_res @ new_res
        Jd = J @ delta
        predicted = -(g @ delta) - 0.5 * (Jd @ Jd)
        if predicted <= _cost_floor(res, cost, prob.pixel_scale) and _at_precision_floor(J, res, g, cost, prob.pixel_scale):
            converged = True
            break
        if np.isfinite(new_cost) and new_cost <= cost and cost - new_cost >= LM_MIN_GAIN * predicted:
            st = cand
            res, J = prob.residuals(st, with_jac=True)
            cost = 0.5 * res @ res
            history.append(cost)
            accepted += 1
            lam = max(lam / 10.0, LM_LAMBDA_MIN)
        else:
            lam *= 10.0
            if _at_precision_floor(J, res, g, cost, prob.pixel_scale):
                converged = True
                break
        logger.debug("lm iter %d cost %.6e |g| %.3e lambda %.1e", it, cost, gnorm, lam)
    else:
        gnorm = float(np.linalg.norm(J.T @ res))
        converged = gnorm < gtol
    if not converged:
        raise NonConvergent(f"LM stopped after {max_iter} iterations with gradient norm {gnorm:.3e}")
    return _make_result(prob, st, res, accepted, history)


def _at_precision_floor(J, res, g, cost, pixel_scale) -> bool:
    """True when even a pure Gauss-Newton step cannot lower the cost by a representable amount.

    Two floors: the relative resolution of the cost itself, and the change
    in cost caused by rounding each projected coordinate at the magnitude of
    the pixel coordinates involved (cross term with the current residuals
    plus the pure-noise term).
    """
    d = _lm_step(J, res, 0.0)
    Jd = J @ d
    predicted = -(g @ d) - 0.5 * (Jd @ Jd)
    return predicted <= _cost_floor(res, cost, pixel_scale)


def _cost_floor(res, cost, pixel_scale) -> float:
    noise = 4 * np.finfo(float).eps * pixel_scale
    return COST_FLOOR * cost + noise * np.abs(res).sum() + 0.5 * len(res) * noise * noise


def _lm_step(J: np.ndarray, res: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(JᵀJ + λ diag(JᵀJ)) δ = -Jᵀr`` as an augmented least-squares problem.

    Columns are scaled to unit norm first; this keeps the step accurate where
    the normal equations would square an already large condition number.
    """
    scale = np.linalg.norm(J, axis=0)
    scale[scale == 0] = 1.0
    Js = J / scale
    if lam > 0:
        n = J.shape[1]
        A = np.vstack([Js, np.sqrt(lam) * np.eye(n)])
        b = np.concatenate([-res, np.zeros(n)])
    else:
        A, b = Js, -res
    z, *_ = np.linalg.lstsq(A, b, rcond=None)
    return z / scale


def _make_result(prob, st, res, iterations, history) -> CalibrationResult:
    il, ir, Rs, ts, Rv, tv = st
    stereo = Pose(Rs, ts)
    poses = {}
    for k, v in enumerate(prob.view_ids):
        pl = Pose(Rv[k], tv[k])
        poses[(v, Camera.LEFT)] = pl
        poses[(v, Camera.RIGHT)] = stereo.compose(pl)
    return CalibrationResult(
        left=CameraIntrinsics.from_array(il),
        right=CameraIntrinsics.from_array(ir),
        view_poses=poses,
        stereo=stereo,
        rms_reprojection=_rms(res),
        iterations=iterations,
        cost_history=tuple(float(c) for c in history),
    )


def reprojection_rms(result: CalibrationResult, board: BoardSpec, obs) -> float:
    by_view = _group(board, obs)
    prob = _Problem(board, by_view)
    st = (
        result.left.as_array(),
        result.right.as_array(),
        result.stereo.rotation,
        result.stereo.translation,
        [result.view_poses[(v, Camera.LEFT)].rotation for v in prob.view_ids],
        [result.view_poses[(v, Camera.LEFT)].translation for v in prob.view_ids],
    )
    res, _ = prob.residuals(st)
    return _rms(res)


def initialize_calibration(board: BoardSpec, obs, frame_size) -> CalibrationResult:
    """Zhang initialization per camera, then averaged stereo extrinsics."""
    by_view = _group(board, obs)
    for o in obs:
        o.check(board, frame_size)
    plane = board.object_points()[:, :2]
    views = sorted(by_view)
    intr = {}
    poses = {}
    for cam in (Camera.LEFT, Camera.RIGHT):
        Hs = [estimate_homography(plane, by_view[v][cam]) for v in views]
        intr[cam] = init_intrinsics(Hs, frame_size)
        for v, H in zip(views, Hs):
            poses[(v, cam)] = pose_from_homography(intr[cam], H)
    stereo = solve_stereo_extrinsics(
        [poses[(v, Camera.LEFT)] for v in views], [poses[(v, Camera.RIGHT)] for v in views]
    )
    result = CalibrationResult(intr[Camera.LEFT], intr[Camera.RIGHT], poses, stereo, 0.0)
    return replace(result, rms_reprojection=reprojection_rms(result, board, obs))


def calibrate_stereo(board: BoardSpec, obs, frame_size, **lm_kwargs) -> CalibrationResult:
    initial = initialize_calibration(board, obs, frame_size)
    logger.info("initial rms %.4f px", initial.rms_reprojection)
    result = refine_calibration(initial, board, obs, **lm_kwargs)
    logger.info("refined rms %.6f px after %d accepted steps", result.rms_reprojection, result.iterations)
    return result


def corners_to_points(corners) -> list[ImagePoint]:
    return [ImagePoint(float(x), float(y)) for x, y in np.asarray(corners).reshape(-1, 2)]
