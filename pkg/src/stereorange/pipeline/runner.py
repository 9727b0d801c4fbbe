"""Frame loop: rectify -> detect -> match -> range -> signal."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from ..detection import (
    Detection,
    DetectorBackend,
    FiducialBackend,
    MockVehicleBackend,
    OnnxBackend,
    StereoDetectionPair,
    detect,
    match_stereo,
)
from ..errors import CalibrationMissing, DisparityTooSmall, PreconditionError, SourceExhausted, StereoRangeError
from ..ranging import DepthEstimate, find_depth, focal_mm_to_pixels
from ..rectification import remap
from ..signaling import SignalLevel, nearest_depth, step
from .calibfile import StereoCalibration
from .config import PipelineConfig
from .sources import FrameSource

STAGES = ("rectify", "detect", "match", "range", "signal")


@dataclass(frozen=True, eq=False)
class FrameResult:
    frame_idx: int
    detections_left: tuple[Detection, ...] = ()
    detections_right: tuple[Detection, ...] = ()
    pairs: tuple[StereoDetectionPair, ...] = ()
    depths: tuple[DepthEstimate, ...] = ()
    signal: SignalLevel = SignalLevel.NO_TARGET
    latencies_ms: dict = field(default_factory=dict)
    total_ms: float = 0.0
    error: str | None = None

    @property
    def nearest(self) -> DepthEstimate | None:
        return min(self.depths, key=lambda d: d.depth) if self.depths else None

    def content(self) -> tuple:
        """Everything except timing, for determinism comparisons."""
        return (
            self.frame_idx,
            self.detections_left,
            self.detections_right,
            self.pairs,
            tuple((d.disparity, d.f_pixel, d.depth) for d in self.depths),
            self.signal,
            self.error,
        )


def make_backend(cfg: PipelineConfig) -> DetectorBackend:
    d = cfg.detector
    if d.backend == "fiducial":
        backend = FiducialBackend(d.fiducial)
    elif d.backend == "mock":
        backend = MockVehicleBackend(d.fiducial)
    else:
        if not d.model or not d.labels:
            raise PreconditionError("onnx backend needs [detector] model and labels")
        backend = OnnxBackend(d.model, d.labels, d.score_threshold, d.nms_iou, d.input_size)
    backend.load()
    return backend


def _resolve(cfg: PipelineConfig, calibration: StereoCalibration | None):
    rectify = cfg.rectify == "true" or (cfg.rectify == "auto" and calibration is not None and calibration.has_maps)
    if rectify and (calibration is None or not calibration.has_maps):
        raise CalibrationMissing("rectification requested but no remap tables are loaded")
    if cfg.f_pixel_source == "calibration":
        if calibration is None or calibration.rectified is None:
            raise CalibrationMissing("f_pixel_source = calibration needs a rectified calibration")
        f_pixel = calibration.rectified.new_intrinsics.fx
    else:
        f_pixel = focal_mm_to_pixels(cfg.ranging)
    return rectify, f_pixel


def run_pipeline(
    cfg: PipelineConfig,
    source: FrameSource,
    backend: DetectorBackend | None = None,
    calibration: StereoCalibration | None = None,
    pace: bool = True,
) -> Iterator[FrameResult]:
    """Process every frame of ``source`` in order, one ``FrameResult`` each.

    Per-frame failures become results with ``error`` set and signal
    ``NoTarget``; the stream continues. Pacing to ``target_fps`` only
    applies to unbounded (live) sources.
    """
    rectify, f_pixel = _resolve(cfg, calibration)
    if backend is None:
        backend = make_backend(cfg)
    period = 1.0 / cfg.target_fps
    prev = SignalLevel.NO_TARGET
    next_slot = time.monotonic()
    for frame in source:
        lat = dict.fromkeys(STAGES, 0.0)
        t_start = time.perf_counter()
        try:
            t = time.perf_counter()
            left, right = frame.left, frame.right
            if rectify:
                left = remap(left, calibration.left_map)
                right = remap(right, calibration.right_map)
            lat["rectify"] = (time.perf_counter() - t) * 1e3

            t = time.perf_counter()
            dl = tuple(detect(left, backend))
            dr = tuple(detect(right, backend))
            lat["detect"] = (time.perf_counter() - t) * 1e3

            t = time.perf_counter()
            pairs = tuple(match_stereo(list(dl), list(dr), cfg.detector.row_tol))
            lat["match"] = (time.perf_counter() - t) * 1e3

            t = time.perf_counter()
            depths = []
            for p in pairs:
                try:
                    depths.append(find_depth(p, cfg.ranging, f_pixel))
                except DisparityTooSmall:
                    pass  # beyond ranging distance
            lat["range"] = (time.perf_counter() - t) * 1e3

            t = time.perf_counter()
            prev = step(prev, nearest_depth(d.depth for d in depths), cfg.thresholds)
            lat["signal"] = (time.perf_counter() - t) * 1e3
            result = FrameResult(frame.index, dl, dr, pairs, tuple(depths), prev, lat, 0.0)
        except StereoRangeError as exc:
            prev = SignalLevel.NO_TARGET
            result = FrameResult(frame.index, signal=prev, latencies_ms=lat, error=f"{type(exc).__name__}: {exc}")
        total = (time.perf_counter() - t_start) * 1e3
        yield replace(result, total_ms=total)
        if pace and getattr(source, "unbounded", False):
            next_slot += period
            delay = next_slot - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            else:
                next_slot = time.monotonic()


@dataclass(frozen=True)
class StageStats:
    mean: float
    median: float
    p95: float

    @classmethod
    def of(cls, values) -> StageStats:
        v = np.asarray(list(values), dtype=float)
        return cls(float(v.mean()), float(statistics.median(v)), float(np.percentile(v, 95)))


@dataclass(frozen=True, eq=False)
class LatencyReport:
    n_frames: int
    stages: dict  # stage -> StageStats
    total: StageStats
    results: tuple = ()

    def format(self) -> str:
        lines = [f"# frames {self.n_frames}", "stage\tmean_ms\tmedian_ms\tp95_ms"]
        for name in STAGES:
            s = self.stages[name]
            lines.append(f"{name}\t{s.mean:.4f}\t{s.median:.4f}\t{s.p95:.4f}")
        lines.append(f"total\t{self.total.mean:.4f}\t{self.total.median:.4f}\t{self.total.p95:.4f}")
        return "\n".join(lines)


def bench_latency(
    cfg: PipelineConfig,
    source: FrameSource,
    n: int,
    backend: DetectorBackend | None = None,
    calibration: StereoCalibration | None = None,
) -> LatencyReport:
    """Per-stage wall-clock latency over the first ``n`` frames, unpaced."""
    if n < 10:
        raise PreconditionError("benchmark needs n >= 10 frames")
    results = []
    for r in run_pipeline(cfg, source, backend, calibration, pace=False):
        results.append(r)
        if len(results) == n:
            break
    if len(results) < n:
        raise SourceExhausted(f"source provided {len(results)} of {n} frames")
    stages = {s: StageStats.of(r.latencies_ms[s] for r in results) for s in STAGES}
    return LatencyReport(n, stages, StageStats.of(r.total_ms for r in results), tuple(results))


def format_result_lines(r: FrameResult) -> list[str]:
    """``frame_idx label depth_cm disparity_px signal_level``, tab separated."""
    if r.error is not None or not r.depths:
        return [f"{r.frame_idx}\t-\t-\t-\t{r.signal.label}"]
    return [
        f"{r.frame_idx}\t{d.pair.label}\t{d.depth:.3f}\t{d.disparity:.3f}\t{r.signal.label}"
        for d in sorted(r.depths, key=lambda d: d.depth)
    ]


def format_detection_lines(r: FrameResult) -> list[str]:
    """``frame_idx camera label confidence x_min y_min x_max y_max``."""
    out = []
    for cam, dets in (("L", r.detections_left), ("R", r.detections_right)):
        for d in dets:
            b = d.bbox
            out.append(
                f"{r.frame_idx} {cam} {d.label} {d.confidence:.4f} {b.x_min:.2f} {b.y_min:.2f} {b.x_max:.2f} {b.y_max:.2f}"
            )
    return out


def format_signal_line(r: FrameResult) -> str:
    """``frame_idx level depth_cm``."""
    n = r.nearest
    return f"{r.frame_idx} {r.signal.label} {'-' if n is None else format(n.depth, '.3f')}"
