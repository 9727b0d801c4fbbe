"""``key = value`` configuration with sections.

Defaults (every key is optional)::

    [pipeline]
    target_fps = 20
    rectify = auto          ; auto | true | false (auto: rectify when maps are loaded)

    [ranging]
    baseline = 9.0          ; cm
    focal_length = 3.6      ; mm, informational
    alpha = 60.0            ; horizontal field of view, degrees
    frame_width = 640
    min_disparity = 0.5     ; px
    f_pixel_source = fov    ; fov | calibration

    [thresholds]
    breakpoints = 115, 231, 346, 462   ; cm
    hysteresis = 5.0                   ; cm

    [detector]
    backend = fiducial      ; fiducial | mock | onnx
    threshold = 128
    min_area = 20
    row_tol = 10.0
    model =                 ; onnx model path
    labels =                ; one class name per line
    score_threshold = 0.5
    nms_iou = 0.45
    input_size = 640

    [io]
    calibration =           ; calibration XML path
    source =                ; dir:<path> | scene:<path>
    frames = 10             ; frame count for scene sources

    [calibration]
    inner_rows = 6
    inner_cols = 9
    square_size = 2.5       ; cm
    image_width = 640
    image_height = 480
    subpix_window = 5
    subpix_max_iter = 30
    subpix_eps = 0.001
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from ..calibration.stereo import BoardSpec
from ..detection.fiducial import FiducialConfig
from ..errors import ConfigError, StereoRangeError
from ..ranging import RangingConfig
from ..signaling import DEFAULT_BREAKPOINTS, SignalThresholds


@dataclass(frozen=True)
class DetectorConfig:
    backend: str = "fiducial"
    fiducial: FiducialConfig = FiducialConfig()
    row_tol: float = 10.0
    model: str | None = None
    labels: str | None = None
    score_threshold: float = 0.5
    nms_iou: float = 0.45
    input_size: int = 640


@dataclass(frozen=True)
class CalibrationConfig:
    board: BoardSpec = BoardSpec(6, 9, 2.5)
    image_size: tuple[int, int] = (640, 480)
    subpix_window: int = 5
    subpix_max_iter: int = 30
    subpix_eps: float = 1e-3


@dataclass(frozen=True)
class PipelineConfig:
    target_fps: float = 20.0
    rectify: str = "auto"
    ranging: RangingConfig = RangingConfig()
    f_pixel_source: str = "fov"
    thresholds: SignalThresholds = SignalThresholds()
    detector: DetectorConfig = DetectorConfig()
    calibration_path: str | None = None
    source: str | None = None
    frames: int = 10
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)

    def __post_init__(self):
        if not self.target_fps > 0:
            raise ConfigError("target_fps must be positive")
        if self.rectify not in ("auto", "true", "false"):
            raise ConfigError("rectify must be auto, true or false")
        if self.f_pixel_source not in ("fov", "calibration"):
            raise ConfigError("f_pixel_source must be fov or calibration")
        if self.detector.backend not in ("fiducial", "mock", "onnx"):
            raise ConfigError(f"unknown detector backend {self.detector.backend!r}")
        if self.frames < 1:
            raise ConfigError("frames must be >= 1")


_KEYS = {
    "pipeline": {"target_fps", "rectify"},
    "ranging": {"baseline", "focal_length", "alpha", "frame_width", "min_disparity", "f_pixel_source"},
    "thresholds": {"breakpoints", "hysteresis"},
    "detector": {"backend", "threshold", "min_area", "row_tol", "model", "labels", "score_threshold", "nms_iou", "input_size"},
    "io": {"calibration", "source", "frames"},
    "calibration": {
        "inner_rows",
        "inner_cols",
        "square_size",
        "image_width",
        "image_height",
        "subpix_window",
        "subpix_max_iter",
        "subpix_eps",
    },
}


def parse_config(text: str, base_dir: Path | None = None) -> PipelineConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    for section in cp.sections():
        if section not in _KEYS:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(cp[section]) - _KEYS[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")

    def get(section, key, conv, default):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key).strip()
        if raw == "":
            return default
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None

    def path(section, key):
        p = get(section, key, str, None)
        if p is None or base_dir is None or Path(p).is_absolute():
            return p
        return str(base_dir / p)

    def source(raw):
        kind, _, rest = raw.partition(":")
        if kind not in ("dir", "scene") or not rest:
            raise ValueError("expected dir:<path> or scene:<path>")
        if base_dir is not None and not Path(rest).is_absolute():
            rest = str(base_dir / rest)
        return f"{kind}:{rest}"

    def floats(raw):
        return tuple(float(v) for v in raw.replace(",", " ").split())

    try:
        ranging = RangingConfig(
            baseline=get("ranging", "baseline", float, 9.0),
            focal_length=get("ranging", "focal_length", float, 3.6),
            alpha=get("ranging", "alpha", float, 60.0),
            frame_width=get("ranging", "frame_width", int, 640),
            min_disparity=get("ranging", "min_disparity", float, 0.5),
        )
        thresholds = SignalThresholds(
            get("thresholds", "breakpoints", floats, DEFAULT_BREAKPOINTS),
            get("thresholds", "hysteresis", float, 5.0),
        )
        detector = DetectorConfig(
            backend=get("detector", "backend", str, "fiducial"),
            fiducial=FiducialConfig(get("detector", "threshold", float, 128.0), get("detector", "min_area", int, 20)),
            row_tol=get("detector", "row_tol", float, 10.0),
            model=path("detector", "model"),
            labels=path("detector", "labels"),
            score_threshold=get("detector", "score_threshold", float, 0.5),
            nms_iou=get("detector", "nms_iou", float, 0.45),
            input_size=get("detector", "input_size", int, 640),
        )
        calibration = CalibrationConfig(
            BoardSpec(
                get("calibration", "inner_rows", int, 6),
                get("calibration", "inner_cols", int, 9),
                get("calibration", "square_size", float, 2.5),
            ),
            (get("calibration", "image_width", int, 640), get("calibration", "image_height", int, 480)),
            get("calibration", "subpix_window", int, 5),
            get("calibration", "subpix_max_iter", int, 30),
            get("calibration", "subpix_eps", float, 1e-3),
        )
        return PipelineConfig(
            target_fps=get("pipeline", "target_fps", float, 20.0),
            rectify=get("pipeline", "rectify", str.lower, "auto"),
            ranging=ranging,
            f_pixel_source=get("ranging", "f_pixel_source", str.lower, "fov"),
            thresholds=thresholds,
            detector=detector,
            calibration_path=path("io", "calibration"),
            source=get("io", "source", source, None),
            frames=get("io", "frames", int, 10),
            calibration=calibration,
        )
    except ConfigError:
        raise
    except (StereoRangeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> PipelineConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text, base_dir=p.parent)
