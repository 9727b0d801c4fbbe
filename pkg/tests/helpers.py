"""Shared image builders for the tests."""

import numpy as np


def checker_saddle(shape, corner, supersample=8, blur=0.0):
    """Area-sampled checkerboard saddle with its crossing at ``corner`` (x, y)."""
    h, w = shape
    offs = (np.arange(supersample) + 0.5) / supersample - 0.5
    ys = np.arange(h)[:, None, None, None] + offs[None, None, :, None]
    xs = np.arange(w)[None, :, None, None] + offs[None, None, None, :]
    s = ((xs - corner[0]) * (ys - corner[1]) > 0).mean(axis=(2, 3))
    img = 30 + 200 * s
    if blur > 0:
        from scipy.ndimage import gaussian_filter

        img = gaussian_filter(img, blur)
    return img


def full_calibration(size=(640, 480)):
    """Calibration with rectification and all four maps, built from a known rig."""
    from stereorange.calibration import CalibrationResult, Camera
    from stereorange.calibration.stereo import BoardSpec
    from stereorange.geometry import CameraIntrinsics, Pose, StereoRig
    from stereorange.pipeline import StereoCalibration
    from stereorange.rectification import build_remap_tables, compute_rectification
    from stereorange.synthsim import board_view_poses

    left = CameraIntrinsics(800, 810, 320, 240, (-0.12, 0.05, 0.001, -0.0005, 0.0))
    right = CameraIntrinsics(790, 805, 315, 245, (-0.1, 0.03, -0.0008, 0.0004, 0.0))
    stereo = Pose.from_rvec([0.01, -0.02, 0.005], [-9, 0.1, 0.2])
    poses = {}
    for v, p in enumerate(board_view_poses(BoardSpec(6, 9, 2.5), 3, distance=70)):
        poses[(v, Camera.LEFT)] = p
        poses[(v, Camera.RIGHT)] = stereo.compose(p)
    result = CalibrationResult(left, right, poses, stereo, 0.123456789)
    rect = compute_rectification(StereoRig(left, right, stereo, size))
    lmap, rmap = build_remap_tables(rect, left, right, size)
    return StereoCalibration(result, size, rect, lmap, rmap)


def toed_in_rig(deg=5.0, baseline=9.0, left=None, right=None):
    """Rig with each camera turned ``deg`` toward the other; returns (rig, R_left)."""
    from stereorange.geometry import CameraIntrinsics, Pose, StereoRig, rotvec_to_matrix

    # each camera turned inward by ``deg`` about its y axis
    a = np.radians(deg)
    intr = CameraIntrinsics(554.256, 554.256, 320, 240)
    R_l = rotvec_to_matrix([0, -a, 0])  # left camera turned toward +x, the right camera
    R_r = rotvec_to_matrix([0, a, 0])
    C_r = np.array([baseline, 0.0, 0.0])
    # rig frame: unrotated, left camera at the origin; the returned rig's world frame is the left camera frame
    R = R_r @ R_l.T
    t = -R_r @ C_r
    return StereoRig(left or intr, right or intr, Pose(R, t)), R_l
