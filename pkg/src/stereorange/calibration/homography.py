"""Plane-to-image homographies and closed-form (Zhang) initialization."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateConfiguration, IllConditioned, InsufficientViews, PreconditionError
from ..geometry import CameraIntrinsics, Pose, orthonormalize


def _normalizer(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    s = np.sqrt(2.0) / d
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _is_collinear(pts: np.ndarray) -> bool:
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    return sv[0] == 0 or sv[1] <= 1e-9 * sv[0]


def estimate_homography(plane_pts, img_pts) -> np.ndarray:
    """Normalized DLT. Returns H with ``img ~ H @ [X, Y, 1]``."""
    P = np.asarray(plane_pts, dtype=float).reshape(-1, 2)
    Q = np.asarray(img_pts, dtype=float).reshape(-1, 2)
    if len(P) != len(Q):
        raise PreconditionError("point lists differ in length")
    if len(P) < 4:
        raise PreconditionError("need at least 4 correspondences")
    if _is_collinear(P) or _is_collinear(Q):
        raise DegenerateConfiguration("correspondences are collinear")
    Tp, Tq = _normalizer(P), _normalizer(Q)
    p = P @ Tp[:2, :2].T + Tp[:2, 2]
    q = Q @ Tq[:2, :2].T + Tq[:2, 2]
    n = len(p)
    A = np.zeros((2 * n, 9))
    one = np.ones(n)
    zero = np.zeros((n, 3))
    ph = np.column_stack([p, one])
    A[0::2, 0:3] = ph
    A[0::2, 3:6] = zero
    A[0::2, 6:9] = -q[:, :1] * ph
    A[1::2, 0:3] = zero
    A[1::2, 3:6] = ph
    A[1::2, 6:9] = -q[:, 1:2] * ph
    _, sv, Vt = np.linalg.svd(A)
    if len(sv) >= 9 and sv[-2] <= 1e-12 * sv[0]:
        raise DegenerateConfiguration("homography is not unique for these points")
    Hn = Vt[-1].reshape(3, 3)
    H = np.linalg.inv(Tq) @ Hn @ Tp
    if abs(H[2, 2]) > 1e-12 * np.abs(H).max():
        H = H / H[2, 2]
    else:
        H = H / np.linalg.norm(H)
    return H


def _v(H: np.ndarray, i: int, j: int) -> np.ndarray:
    hi, hj = H[:, i], H[:, j]
    return np.array(
        [
            hi[0] * hj[0],
            hi[0] * hj[1] + hi[1] * hj[0],
            hi[1] * hj[1],
            hi[2] * hj[0] + hi[0] * hj[2],
            hi[2] * hj[1] + hi[1] * hj[2],
            hi[2] * hj[2],
        ]
    )


def init_intrinsics(homographies, frame_size) -> CameraIntrinsics:
    """Closed-form intrinsics from >= 3 plane homographies, zero skew.

    Homographies are first expressed in a pixel frame normalized by
    ``frame_size`` so the constraint matrix is well scaled; the recovered
    matrix is mapped back afterwards. Distortion starts at zero.
    """
    Hs = [np.asarray(H, dtype=float) for H in homographies]
    if len(Hs) < 3:
        raise InsufficientViews(f"need >= 3 homographies, got {len(Hs)}")
    w, h = frame_size
    s = 2.0 / (w + h)
    N = np.array([[s, 0.0, -s * w / 2], [0.0, s, -s * h / 2], [0.0, 0.0, 1.0]])
    rows = []
    for H in Hs:
        Hn = N @ H
        Hn = Hn / np.linalg.norm(Hn[:, :2])
        rows.append(_v(Hn, 0, 1))
        rows.append(_v(Hn, 0, 0) - _v(Hn, 1, 1))
    rows.append(np.array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]))  # zero skew
    V = np.array(rows)
    _, sv, Vt = np.linalg.svd(V)
    if sv[-2] <= 1e-9 * sv[0]:
        raise IllConditioned("homography constraints are rank-deficient (views too similar)")
    B11, B12, B22, B13, B23, B33 = Vt[-1]
    den = B11 * B22 - B12 * B12
    if B11 == 0 or den == 0:
        raise IllConditioned("degenerate absolute-conic estimate")
    v0 = (B12 * B13 - B11 * B23) / den
    lam = B33 - (B13 * B13 + v0 * (B12 * B13 - B11 * B23)) / B11
    if lam / B11 <= 0 or lam * B11 / den <= 0:
        raise IllConditioned("absolute-conic estimate is not positive definite")
    alpha = np.sqrt(lam / B11)
    beta = np.sqrt(lam * B11 / den)
    u0 = -B13 * alpha * alpha / lam
    fx, fy = alpha / s, beta / s
    cx, cy = (u0 + s * w / 2) / s, (v0 + s * h / 2) / s
    return CameraIntrinsics(float(fx), float(fy), float(cx), float(cy))


def pose_from_homography(intr: CameraIntrinsics, H) -> Pose:
    """Board-to-camera pose; of the two sign choices the one with Z_cam > 0 wins."""
    A = np.linalg.inv(intr.K) @ np.asarray(H, dtype=float)
    lam = 1.0 / np.linalg.norm(A[:, 0])
    r1 = lam * A[:, 0]
    r2 = lam * A[:, 1]
    t = lam * A[:, 2]
    if t[2] < 0:
        r1, r2, t = -r1, -r2, -t
    R = orthonormalize(np.column_stack([r1, r2, np.cross(r1, r2)]))
    return Pose(R, t)
