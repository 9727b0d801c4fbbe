import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import checker_saddle
from stereorange.calibration import (
    BoardSpec,
    Camera,
    CornerObservation,
    calibrate_stereo,
    estimate_homography,
    init_intrinsics,
    initialize_calibration,
    pose_from_homography,
    read_corner_file,
    refine_calibration,
    refine_corners_subpixel,
    reprojection_rms,
    solve_stereo_extrinsics,
    write_corner_file,
)
from stereorange.calibration.stereo import _Problem, _group
from stereorange.errors import (
    DegenerateConfiguration,
    EmptyInput,
    FlatRegion,
    FormatError,
    IllConditioned,
    InsufficientViews,
    OutOfBounds,
)
from stereorange.geometry import CameraIntrinsics, Pose, StereoRig, project_points
from stereorange.synthsim import board_observations, board_view_poses


# --- sub-pixel corners -----------------------------------------------------------


def test_subpixel_refines_offset_guess():
    truth = (100.37, 57.82)
    img = checker_saddle((120, 200), truth, blur=1.0)
    (p,) = refine_corners_subpixel(img, [(truth[0] + 0.7, truth[1] - 0.7)])
    assert np.hypot(p.x - truth[0], p.y - truth[1]) < 0.05


def test_subpixel_fixed_point_at_symmetric_center():
    img = checker_saddle((80, 80), (40.0, 40.0), blur=1.0)
    (p,) = refine_corners_subpixel(img, [(40.0, 40.0)], eps=1e-3)
    assert abs(p.x - 40.0) <= 1e-3 and abs(p.y - 40.0) <= 1e-3


def test_subpixel_flat_region():
    with pytest.raises(FlatRegion):
        refine_corners_subpixel(np.full((50, 50), 128.0), [(25, 25)])


def test_subpixel_out_of_bounds():
    img = checker_saddle((50, 50), (25.0, 25.0))
    with pytest.raises(OutOfBounds):
        refine_corners_subpixel(img, [(3, 25)], window=5)


# --- homography ------------------------------------------------------------------


def _grid():
    return BoardSpec(6, 9, 2.5).object_points()[:, :2]


def test_homography_identity():
    pts = _grid()
    H = estimate_homography(pts, pts)
    np.testing.assert_allclose(H / H[2, 2], np.eye(3), atol=1e-9)


def test_homography_recovers_known_matrix():
    H0 = np.array([[1.2, 0.1, 30.0], [-0.05, 0.9, 12.0], [1e-3, -5e-4, 1.0]])
    pts = _grid()
    hom = np.column_stack([pts, np.ones(len(pts))]) @ H0.T
    img = hom[:, :2] / hom[:, 2:]
    H = estimate_homography(pts, img)
    H = H / H[2, 2]
    assert np.max(np.abs(H - H0) / np.maximum(np.abs(H0), 1e-3)) < 1e-6


def test_homography_collinear():
    pts = np.array([[0, 0], [1, 1], [2, 2], [3, 3]], dtype=float)
    with pytest.raises(DegenerateConfiguration):
        estimate_homography(pts, pts * 2)


def _synth_homographies(intr, poses):
    K = intr.K
    return [K @ np.column_stack([p.rotation[:, 0], p.rotation[:, 1], p.translation]) for p in poses]


def test_init_intrinsics_recovers_known():
    intr = CameraIntrinsics(800, 810, 320, 240)
    poses = board_view_poses(BoardSpec(6, 9, 2.5), 5, distance=60)
    est = init_intrinsics(_synth_homographies(intr, poses), (640, 480))
    for got, want in ((est.fx, 800), (est.fy, 810), (est.cx, 320), (est.cy, 240)):
        assert abs(got - want) / want < 0.005


def test_init_intrinsics_two_views():
    intr = CameraIntrinsics(800, 810, 320, 240)
    poses = board_view_poses(BoardSpec(6, 9, 2.5), 2)
    with pytest.raises(InsufficientViews):
        init_intrinsics(_synth_homographies(intr, poses), (640, 480))


def test_init_intrinsics_identical_fronto_parallel():
    intr = CameraIntrinsics(800, 810, 320, 240)
    pose = Pose(np.eye(3), [-10, -6, 60])
    with pytest.raises(IllConditioned):
        init_intrinsics(_synth_homographies(intr, [pose] * 4), (640, 480))


def test_pose_from_homography_roundtrip():
    intr = CameraIntrinsics(800, 810, 320, 240)
    (pose,) = board_view_poses(BoardSpec(6, 9, 2.5), 1)
    (H,) = _synth_homographies(intr, [pose])
    got = pose_from_homography(intr, -3.0 * H)
    np.testing.assert_allclose(got.rotation, pose.rotation, atol=1e-9)
    np.testing.assert_allclose(got.translation, pose.translation, atol=1e-8)


# --- stereo extrinsics -------------------------------------------------------------


def test_extrinsics_shifted_rig():
    lp = board_view_poses(BoardSpec(6, 9, 2.5), 4)
    shift = Pose(np.eye(3), [-9, 0, 0])
    s = solve_stereo_extrinsics(lp, [shift.compose(p) for p in lp])
    np.testing.assert_allclose(s.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(s.translation, [-9, 0, 0], atol=1e-12)
    assert np.linalg.norm(s.translation) == pytest.approx(9.0)


def test_extrinsics_equal_poses_give_identity():
    lp = board_view_poses(BoardSpec(6, 9, 2.5), 3)
    s = solve_stereo_extrinsics(lp, lp)
    np.testing.assert_allclose(s.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(s.translation, 0, atol=1e-12)


def test_extrinsics_single_view_exact():
    pl = Pose.from_rvec([0.2, -0.1, 0.05], [1, 2, 50])
    pr = Pose.from_rvec([0.25, -0.12, 0.02], [-8, 2.5, 51])
    s = solve_stereo_extrinsics([pl], [pr])
    np.testing.assert_allclose(s.compose(pl).rotation, pr.rotation, atol=1e-12)
    np.testing.assert_allclose(s.compose(pl).translation, pr.translation, atol=1e-12)


def test_extrinsics_empty():
    with pytest.raises(EmptyInput):
        solve_stereo_extrinsics([], [])


# --- LM refinement -------------------------------------------------------------------


def test_refine_noise_free(calib_rig, board):
    obs = board_observations(calib_rig, board, board_view_poses(board, 12, distance=70))
    res = calibrate_stereo(board, obs, (640, 480))
    assert abs(res.left.fx / 800 - 1) < 1e-3 and abs(res.left.fy / 810 - 1) < 1e-3
    assert abs(res.baseline / calib_rig.baseline - 1) < 1e-3
    assert res.rms_reprojection < 1e-6


def test_refine_at_optimum_is_unchanged(calib_rig, board):
    view_poses = board_view_poses(board, 6, distance=70)
    obs = board_observations(calib_rig, board, view_poses)
    poses = {}
    for v, p in enumerate(view_poses):
        poses[(v, Camera.LEFT)] = p
        poses[(v, Camera.RIGHT)] = calib_rig.stereo.compose(p)
    from stereorange.calibration import CalibrationResult

    truth = CalibrationResult(calib_rig.left, calib_rig.right, poses, calib_rig.stereo, 0.0)
    res = refine_calibration(truth, board, obs)
    assert res.iterations == 0
    np.testing.assert_allclose(res.left.as_array(), calib_rig.left.as_array(), atol=1e-9)
    np.testing.assert_allclose(res.stereo.translation, calib_rig.stereo.translation, atol=1e-9)


def test_refine_with_noise(calib_rig, board):
    obs = board_observations(calib_rig, board, board_view_poses(board, 12, distance=70), noise_px=0.2, seed=1)
    init = initialize_calibration(board, obs, (640, 480))
    res = refine_calibration(init, board, obs)
    assert res.rms_reprojection <= 0.3
    assert abs(res.left.fx / 800 - 1) < 0.01
    assert res.rms_reprojection <= init.rms_reprojection
    for pose in res.view_poses.values():
        np.testing.assert_allclose(pose.rotation.T @ pose.rotation, np.eye(3), atol=1e-9)
    # reprojecting the board with the recovered parameters reproduces the reported RMS
    assert reprojection_rms(res, board, obs) == pytest.approx(res.rms_reprojection, rel=1e-9)


def test_analytic_jacobian_matches_finite_differences(calib_rig, board):
    small = BoardSpec(3, 4, 2.5)
    obs = board_observations(calib_rig, small, board_view_poses(small, 3, distance=50), noise_px=0.3, seed=2)
    init = initialize_calibration(small, obs, (640, 480))
    prob = _Problem(small, _group(small, obs))
    st0 = (
        init.left.as_array(),
        init.right.as_array(),
        init.stereo.rotation,
        init.stereo.translation,
        [init.view_poses[(v, Camera.LEFT)].rotation for v in prob.view_ids],
        [init.view_poses[(v, Camera.LEFT)].translation for v in prob.view_ids],
    )
    r0, J = prob.residuals(st0, with_jac=True)
    h = 1e-6
    for j in range(prob.n_params):
        d = np.zeros(prob.n_params)
        d[j] = h
        rp, _ = prob.residuals(prob.apply(st0, d))
        rm, _ = prob.residuals(prob.apply(st0, -d))
        fd = (rp - rm) / (2 * h)
        scale = max(1.0, np.max(np.abs(fd)))
        assert np.max(np.abs(fd - J[:, j])) / scale < 1e-4, j


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), noise=st.floats(0.0, 0.5))
def test_lm_cost_history_non_increasing(seed, noise):
    small = BoardSpec(6, 8, 3.0)
    rig = StereoRig(
        CameraIntrinsics(700, 705, 320, 240, (-0.05, 0.01, 0, 0, 0)),
        CameraIntrinsics(690, 700, 318, 242, (-0.04, 0.0, 0, 0, 0)),
        Pose.from_rvec([0.0, 0.02, 0.0], [-9, 0, 0]),
    )
    obs = board_observations(rig, small, board_view_poses(small, 8, distance=70, seed=seed), noise_px=noise, seed=seed)
    init = initialize_calibration(small, obs, (640, 480))
    res = refine_calibration(init, small, obs)
    hist = np.array(res.cost_history)
    assert np.all(np.diff(hist) <= 0)
    assert res.rms_reprojection <= init.rms_reprojection + 1e-12
    for pose in res.view_poses.values():
        assert np.max(np.abs(pose.rotation.T @ pose.rotation - np.eye(3))) <= 1e-9


# --- corner file -------------------------------------------------------------------


def test_corner_file_roundtrip(tmp_path, calib_rig, board):
    obs = board_observations(calib_rig, board, board_view_poses(board, 3, distance=70), noise_px=0.1, seed=3)
    path = tmp_path / "corners.txt"
    write_corner_file(path, obs, board)
    back = read_corner_file(path, board)
    assert [(o.view_id, o.camera) for o in back] == [(o.view_id, o.camera) for o in obs]
    for a, b in zip(obs, back):
        np.testing.assert_array_equal(a.corners, b.corners)


def test_corner_file_missing_corner(tmp_path, board):
    lines = [f"0 L {r} {c} {c * 10.0} {r * 10.0}" for r in range(6) for c in range(9)][:-1]
    path = tmp_path / "c.txt"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError):
        read_corner_file(path, board)


def test_corner_file_bad_field_count(tmp_path, board):
    path = tmp_path / "c.txt"
    path.write_text("0 L 0 0 1.0\n")
    with pytest.raises(FormatError):
        read_corner_file(path, board)


def test_observation_shape_checked(board):
    with pytest.raises(ValueError):
        CornerObservation(0, Camera.LEFT, np.zeros((5, 2))).check(board)


def test_board_object_points(board):
    P = board.object_points()
    assert P.shape == (54, 3)
    np.testing.assert_array_equal(P[1], [2.5, 0, 0])
    np.testing.assert_array_equal(P[9], [0, 2.5, 0])
    assert project_points(CameraIntrinsics(500, 500, 0, 0), Pose(np.eye(3), [0, 0, 10]), P).shape == (54, 2)
