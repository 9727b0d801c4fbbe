from .cornerfile import read_corner_file, write_corner_file
from .corners import refine_corners_subpixel
from .homography import estimate_homography, init_intrinsics, pose_from_homography
from .stereo import (
    BoardSpec,
    CalibrationResult,
    Camera,
    CornerObservation,
    calibrate_stereo,
    initialize_calibration,
    refine_calibration,
    reprojection_rms,
    solve_stereo_extrinsics,
)

__all__ = [
    "BoardSpec",
    "CalibrationResult",
    "Camera",
    "CornerObservation",
    "calibrate_stereo",
    "estimate_homography",
    "init_intrinsics",
    "initialize_calibration",
    "pose_from_homography",
    "read_corner_file",
    "refine_calibration",
    "refine_corners_subpixel",
    "reprojection_rms",
    "solve_stereo_extrinsics",
    "write_corner_file",
]
