from .calibfile import StereoCalibration, load_calibration, save_calibration
from .config import CalibrationConfig, DetectorConfig, PipelineConfig, load_config, parse_config
from .evaluation import ErrorReport, evaluate_error_table, read_error_table
from .runner import STAGES, FrameResult, LatencyReport, bench_latency, make_backend, run_pipeline
from .sources import CameraSource, DirectorySource, Frame, FrameSource, SyntheticSource, open_source

__all__ = [
    "STAGES",
    "CalibrationConfig",
    "CameraSource",
    "DetectorConfig",
    "DirectorySource",
    "ErrorReport",
    "Frame",
    "FrameResult",
    "FrameSource",
    "LatencyReport",
    "PipelineConfig",
    "StereoCalibration",
    "SyntheticSource",
    "bench_latency",
    "evaluate_error_table",
    "load_calibration",
    "load_config",
    "make_backend",
    "open_source",
    "parse_config",
    "read_error_table",
    "run_pipeline",
    "save_calibration",
]
