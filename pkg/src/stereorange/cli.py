"""Command-line entry point: ``stereorange <subcommand>``.

Exit codes: 0 success, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .calibration import Camera, CornerObservation, calibrate_stereo, read_corner_file, refine_corners_subpixel
from .errors import ConfigError, StereoRangeError
from .geometry import StereoRig
from .imageio import read_pgm, write_pgm
from .pipeline import (
    PipelineConfig,
    StereoCalibration,
    bench_latency,
    evaluate_error_table,
    load_calibration,
    load_config,
    open_source,
    read_error_table,
    run_pipeline,
    save_calibration,
)
from .pipeline.runner import format_detection_lines, format_result_lines, format_signal_line
from .pipeline.sources import CameraSource, DirectorySource, SyntheticSource
from .rectification import build_remap_tables, compute_rectification, remap
from .synthsim import write_truth

log = logging.getLogger("stereorange")


def _config(args) -> PipelineConfig:
    return load_config(args.config) if getattr(args, "config", None) else PipelineConfig()


def _calibration(path) -> StereoCalibration | None:
    return None if path is None else load_calibration(path)


def _find_image(root: Path, cam: str, view: int) -> Path:
    for p in sorted((root / cam).glob("*.pgm")):
        try:
            if int(p.stem) == view:
                return p
        except ValueError:
            continue
    raise StereoRangeError(f"no image for view {view} in {root / cam}")


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    cc = cfg.calibration
    obs = read_corner_file(args.corners, cc.board)
    if args.images:
        root = Path(args.images)
        refined = []
        for o in obs:
            img = read_pgm(_find_image(root, "left" if o.camera is Camera.LEFT else "right", o.view_id))
            pts = refine_corners_subpixel(img, o.corners, cc.subpix_window, cc.subpix_max_iter, cc.subpix_eps)
            refined.append(CornerObservation(o.view_id, o.camera, np.array(pts)))
        obs = refined
    result = calibrate_stereo(cc.board, obs, cc.image_size)
    rig = StereoRig(result.left, result.right, result.stereo, cc.image_size)
    rect = compute_rectification(rig)
    lmap, rmap = (None, None) if args.no_maps else build_remap_tables(rect, result.left, result.right, cc.image_size)
    save_calibration(args.out, StereoCalibration(result, cc.image_size, rect, lmap, rmap))
    print(f"rms_reprojection_px\t{result.rms_reprojection:.6f}")
    print(f"baseline_cm\t{result.baseline:.6f}")
    print(f"left\t{result.left}")
    print(f"right\t{result.right}")
    print(f"wrote\t{args.out}")
    return 0


def cmd_rectify(args) -> int:
    cal = load_calibration(args.calibration)
    if not cal.has_maps:
        raise ConfigError("calibration file has no remap tables")
    src = DirectorySource(args.input)
    out = Path(args.output)
    (out / "left").mkdir(parents=True, exist_ok=True)
    (out / "right").mkdir(parents=True, exist_ok=True)
    for frame, name in zip(src, src.names):
        stem = Path(name).stem + ".pgm"
        write_pgm(out / "left" / stem, remap(frame.left, cal.left_map))
        write_pgm(out / "right" / stem, remap(frame.right, cal.right_map))
    print(f"rectified {len(src)} frame pair(s) into {out}")
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    spec = args.source or cfg.source
    if spec is None:
        raise ConfigError("no input source (use --source or [io] source)")
    frames = args.frames or cfg.frames
    source = open_source(spec, frames, cfg.target_fps)
    cal = _calibration(args.calibration or cfg.calibration_path)
    out = open(args.out, "w") if args.out else sys.stdout
    det_f = open(args.detections, "w") if args.detections else None
    sig_f = open(args.signals, "w") if args.signals else None
    try:
        print("# frame_idx\tlabel\tdepth_cm\tdisparity_px\tsignal_level", file=out)
        for r in run_pipeline(cfg, source, calibration=cal, pace=not args.no_pace):
            for line in format_result_lines(r):
                print(line, file=out)
            if r.error:
                log.warning("frame %d: %s", r.frame_idx, r.error)
            if det_f:
                for line in format_detection_lines(r):
                    print(line, file=det_f)
            if sig_f:
                print(format_signal_line(r), file=sig_f)
    finally:
        for f in (det_f, sig_f):
            if f:
                f.close()
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_synth(args) -> int:
    src = SyntheticSource(args.scene, args.frames)
    out = Path(args.output)
    (out / "left").mkdir(parents=True, exist_ok=True)
    (out / "right").mkdir(parents=True, exist_ok=True)
    for frame in src:
        write_pgm(out / "left" / f"{frame.index:06d}.pgm", frame.left)
        write_pgm(out / "right" / f"{frame.index:06d}.pgm", frame.right)
    write_truth(out / "truth.txt", src.truth)
    print(f"rendered {len(src)} frame pair(s), {len(src.truth)} target(s) into {out}")
    return 0


def cmd_eval(args) -> int:
    report = evaluate_error_table(read_error_table(args.table), args.rounding)
    print(report.format())
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    spec = args.source or cfg.source
    if spec is None:
        raise ConfigError("no input source (use --source or [io] source)")
    source = open_source(spec, max(args.n, cfg.frames), cfg.target_fps)
    report = bench_latency(cfg, source, args.n, calibration=_calibration(args.calibration or cfg.calibration_path))
    print(report.format())
    return 0


def cmd_capture(args) -> int:
    out = Path(args.output)
    (out / "left").mkdir(parents=True, exist_ok=True)
    (out / "right").mkdir(parents=True, exist_ok=True)
    n = 0
    for frame in CameraSource(args.left_device, args.right_device):
        write_pgm(out / "left" / f"{frame.index:06d}.pgm", frame.left)
        write_pgm(out / "right" / f"{frame.index:06d}.pgm", frame.right)
        n += 1
        if n >= args.count:
            break
    print(f"captured {n} pair(s) into {out}")
    return 0 if n else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stereorange", description="Stereo-camera vehicle ranging toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("calibrate", help="corner file -> calibration file")
    s.add_argument("--config")
    s.add_argument("--corners", required=True)
    s.add_argument("--images", help="directory with left/ and right/ PGMs named by view id; refines corners")
    s.add_argument("--out", default="stereoCalibration.xml")
    s.add_argument("--no-maps", action="store_true", help="skip the four remap tables")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("rectify", help="frame pairs + calibration -> rectified pairs")
    s.add_argument("--calibration", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_rectify)

    s = sub.add_parser("run", help="full pipeline; writes the per-frame result stream")
    s.add_argument("--config")
    s.add_argument("--source", help="dir:<path> or scene:<path>")
    s.add_argument("--frames", type=int)
    s.add_argument("--calibration")
    s.add_argument("--out")
    s.add_argument("--detections")
    s.add_argument("--signals")
    s.add_argument("--no-pace", action="store_true")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("synth", help="scene file -> rendered pairs + truth")
    s.add_argument("--scene", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--frames", type=int, default=1)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("eval", help="actual/measured table -> error report")
    s.add_argument("table")
    s.add_argument("--rounding", choices=["truncate", "half-up"], default="truncate")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="per-stage latency report")
    s.add_argument("--config")
    s.add_argument("--source")
    s.add_argument("--calibration")
    s.add_argument("-n", type=int, default=100)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("capture", help="save frame pairs from two live cameras")
    s.add_argument("--left-device", type=int, default=1)
    s.add_argument("--right-device", type=int, default=0)
    s.add_argument("--output", required=True)
    s.add_argument("--count", type=int, default=1)
    s.set_defaults(func=cmd_capture)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (StereoRangeError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
