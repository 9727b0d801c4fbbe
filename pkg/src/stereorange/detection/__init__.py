from .backends import DetectorBackend, FiducialBackend, MockVehicleBackend, OnnxBackend, decode_yolo, detect, nms
from .fiducial import FiducialConfig, detect_fiducial
from .matching import DEFAULT_ROW_TOL, match_stereo
from .types import BoundingBox, Detection, StereoDetectionPair

__all__ = [
    "DEFAULT_ROW_TOL",
    "BoundingBox",
    "Detection",
    "DetectorBackend",
    "FiducialBackend",
    "FiducialConfig",
    "MockVehicleBackend",
    "OnnxBackend",
    "StereoDetectionPair",
    "decode_yolo",
    "detect",
    "detect_fiducial",
    "match_stereo",
    "nms",
]
