import concurrent.futures
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import full_calibration
from stereorange.errors import (
    CalibrationMissing,
    ConfigError,
    DimensionMismatch,
    FormatError,
    NonPositiveActual,
    PreconditionError,
    SourceExhausted,
)
from stereorange.geometry import StereoRig
from stereorange.imageio import read_pgm, write_pgm
from stereorange.pipeline import (
    STAGES,
    DirectorySource,
    PipelineConfig,
    SyntheticSource,
    bench_latency,
    evaluate_error_table,
    load_calibration,
    load_config,
    open_source,
    parse_config,
    read_error_table,
    run_pipeline,
    save_calibration,
)
from stereorange.pipeline.runner import format_result_lines, format_signal_line
from stereorange.rectification import remap
from stereorange.signaling import SignalLevel, classify, nearest_depth
from stereorange.synthsim import SyntheticScene, SyntheticTarget

F = 554.2562584220407
REFERENCE_TABLE = [(34, 36), (35, 33), (40, 40), (42, 39), (43, 45), (45, 48), (52, 53), (54, 52), (55, 53), (56, 57)]
NO_RECT = PipelineConfig(rectify="false")


def _scene(targets=(), size=(640, 480)):
    return SyntheticScene(StereoRig.rectified(F, 9.0, size), targets)


# --- evaluation -----------------------------------------------------------------


def test_error_rows():
    rep = evaluate_error_table([(34, 36), (40, 40)])
    assert [str(r.error_pct_rounded) for r in rep.rows] == ["5.88", "0.00"]


def test_error_table_full():
    rep = evaluate_error_table(REFERENCE_TABLE)
    assert rep.mean_rounded == Decimal("4.107")
    assert float(rep.mean_unrounded) == pytest.approx(4.1106, abs=1e-4)


def test_error_table_half_up_mode():
    rep = evaluate_error_table(REFERENCE_TABLE, rounding="half-up")
    assert [str(r.error_pct_rounded) for r in rep.rows][5] == "6.67"
    assert rep.mean_rounded == Decimal("4.110")


def test_error_table_non_positive():
    with pytest.raises(NonPositiveActual):
        evaluate_error_table([(0, 5)])


def test_error_table_file(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("# actual measured\n34 36\n40, 40\n")
    assert read_error_table(p) == [(Decimal(34), Decimal(36)), (Decimal(40), Decimal(40))]
    p.write_text("34\n")
    with pytest.raises(FormatError):
        read_error_table(p)


# --- config ------------------------------------------------------------------------


def test_config_defaults():
    cfg = parse_config("")
    assert cfg.target_fps == 20 and cfg.ranging.baseline == 9.0
    assert cfg.thresholds.breakpoints == (115, 231, 346, 462)
    assert cfg.calibration.board.inner_rows == 6 and cfg.calibration.board.inner_cols == 9


def test_config_values_and_paths(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(
        "[pipeline]\ntarget_fps = 15 ; comment\n[ranging]\nbaseline = 12\nalpha = 70\n"
        "[thresholds]\nbreakpoints = 100, 200, 300, 400\n[io]\ncalibration = cal.xml\nsource = dir:frames\n"
    )
    cfg = load_config(p)
    assert cfg.target_fps == 15 and cfg.ranging.baseline == 12 and cfg.ranging.alpha == 70
    assert cfg.thresholds.breakpoints == (100, 200, 300, 400)
    assert cfg.calibration_path == str(tmp_path / "cal.xml")
    assert cfg.source == f"dir:{tmp_path / 'frames'}"


@pytest.mark.parametrize(
    "text",
    [
        "[bogus]\nx = 1\n",
        "[ranging]\nnope = 1\n",
        "[ranging]\nbaseline = abc\n",
        "[ranging]\nbaseline = -1\n",
        "[pipeline]\ntarget_fps = 0\n",
        "[thresholds]\nbreakpoints = 4, 3, 2, 1\n",
        "[detector]\nbackend = magic\n",
        "[io]\nsource = tcp:1234\n",
        "not a config",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.ini")


# --- sources ----------------------------------------------------------------------------


def _write_dir(root, n, size=(64, 48)):
    (root / "left").mkdir(parents=True)
    (root / "right").mkdir()
    for i in range(n):
        img = np.full(size[::-1], i * 10, np.uint8)
        write_pgm(root / "left" / f"{i:06d}.pgm", img)
        write_pgm(root / "right" / f"{i:06d}.pgm", img)


def test_pgm_roundtrip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (30, 40), dtype=np.uint8)
    write_pgm(tmp_path / "a.pgm", img)
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5")
    np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), img)


def test_directory_source_ten_frames(tmp_path):
    _write_dir(tmp_path, 10)
    results = list(run_pipeline(NO_RECT, DirectorySource(tmp_path)))
    assert [r.frame_idx for r in results] == list(range(10))


def test_directory_source_mismatched_names(tmp_path):
    _write_dir(tmp_path, 2)
    (tmp_path / "right" / "000001.pgm").unlink()
    with pytest.raises(FormatError):
        DirectorySource(tmp_path)


def test_directory_source_inconsistent_dims(tmp_path):
    _write_dir(tmp_path, 1)
    write_pgm(tmp_path / "right" / "000000.pgm", np.zeros((10, 10), np.uint8))
    with pytest.raises(FormatError):
        list(DirectorySource(tmp_path))


def test_open_source_unknown():
    with pytest.raises(PreconditionError):
        open_source("tcp:foo")


def test_synthetic_source_frames_read_only():
    src = SyntheticSource(_scene(), 3)
    frames = list(src)
    assert [f.index for f in frames] == [0, 1, 2]
    assert not frames[0].left.flags.writeable


# --- runner --------------------------------------------------------------------------


def test_single_disc_at_150():
    src = SyntheticSource(_scene([SyntheticTarget.disc(4.5, 0, 150, 6)]), 5)
    for r in run_pipeline(NO_RECT, src):
        assert len(r.pairs) == 1
        assert abs(r.depths[0].depth - 150) / 150 < 0.01
        assert r.signal is classify(r.depths[0].depth)
        assert r.error is None
        assert all(v >= 0 for v in r.latencies_ms.values())


def test_empty_scene_no_target():
    for r in run_pipeline(NO_RECT, SyntheticSource(_scene(), 4)):
        assert r.signal is SignalLevel.NO_TARGET
        assert format_result_lines(r) == [f"{r.frame_idx}\t-\t-\t-\tNoTarget"]
        assert format_signal_line(r) == f"{r.frame_idx} NoTarget -"


def test_rectify_requested_without_maps():
    with pytest.raises(CalibrationMissing):
        next(run_pipeline(PipelineConfig(rectify="true"), SyntheticSource(_scene(), 1)))


def test_calibration_focal_requested_without_calibration():
    with pytest.raises(CalibrationMissing):
        next(run_pipeline(PipelineConfig(f_pixel_source="calibration"), SyntheticSource(_scene(), 1)))


def test_per_frame_errors_do_not_stop_stream():
    class Flaky:
        name = "flaky"

        def load(self):
            pass

        def infer(self, frame):
            self.n = getattr(self, "n", 0) + 1
            if self.n == 3:  # left camera of frame 1
                raise RuntimeError("transient")
            return []

    results = list(run_pipeline(NO_RECT, SyntheticSource(_scene(), 4), backend=Flaky()))
    assert [r.frame_idx for r in results] == [0, 1, 2, 3]
    assert results[1].error is not None and results[1].signal is SignalLevel.NO_TARGET
    assert results[0].error is None and results[2].error is None


def test_pipeline_rectifies_with_loaded_maps():
    cal = full_calibration()
    src = SyntheticSource(_scene([SyntheticTarget.disc(4.5, 0, 150, 6)]), 2)
    results = list(run_pipeline(PipelineConfig(), src, calibration=cal))
    assert all(r.latencies_ms["rectify"] > 0 for r in results)


def test_bench_structure():
    rep = bench_latency(NO_RECT, SyntheticSource(_scene([SyntheticTarget.disc(4.5, 0, 150, 6)]), 10), 10)
    assert set(rep.stages) == set(STAGES)
    for name in STAGES:
        s = rep.stages[name]
        if name != "rectify":
            assert s.mean > 0
        assert s.mean <= rep.total.mean
    assert sum(s.mean for s in rep.stages.values()) <= rep.total.mean
    assert rep.format().splitlines()[1] == "stage\tmean_ms\tmedian_ms\tp95_ms"


def test_bench_rejects_small_n():
    with pytest.raises(PreconditionError):
        bench_latency(NO_RECT, SyntheticSource(_scene(), 20), 5)


def test_bench_source_exhausted():
    with pytest.raises(SourceExhausted):
        bench_latency(NO_RECT, SyntheticSource(_scene(), 5), 10)


def test_bench_repeat_runs_differ_only_in_timing():
    src = SyntheticSource(_scene([SyntheticTarget.disc(4.5, 0, 150, 6), SyntheticTarget.disc(-20, 10, 300, 12)]), 10)
    a = bench_latency(NO_RECT, src, 10)
    b = bench_latency(NO_RECT, src, 10)
    assert [r.content() for r in a.results] == [r.content() for r in b.results]


disc = st.builds(
    lambda x, y, z, r: SyntheticTarget.disc(x * z / F, y * z / F, z, r * z / F),
    x=st.floats(-60, 60),
    y=st.floats(-40, 40),
    z=st.floats(40, 600),
    r=st.floats(3, 10),
)


@settings(max_examples=100, deadline=None)
@given(targets=st.lists(disc, max_size=4), n=st.integers(1, 5))
def test_pipeline_order_and_determinism(targets, n):
    src = SyntheticSource(_scene(targets, (160, 120)), n)
    first = list(run_pipeline(NO_RECT, src))
    second = list(run_pipeline(NO_RECT, src))
    assert [r.frame_idx for r in first] == list(range(n))
    assert [r.content() for r in first] == [r.content() for r in second]
    for r in first:
        assert r.signal is classify(nearest_depth(d.depth for d in r.depths))


def test_pipeline_determinism_across_threads():
    src = SyntheticSource(_scene([SyntheticTarget.disc(4.5, 0, 150, 6), SyntheticTarget.disc(-20, 10, 300, 12)]), 6)
    ref = [r.content() for r in run_pipeline(NO_RECT, src)]
    with concurrent.futures.ThreadPoolExecutor(4) as pool:
        runs = list(pool.map(lambda _: [r.content() for r in run_pipeline(NO_RECT, src)], range(4)))
    assert all(run == ref for run in runs)


# --- calibration file ----------------------------------------------------------------


def test_calibration_file_roundtrip_small(tmp_path):
    cal = full_calibration((80, 60))
    save_calibration(tmp_path / "c.xml", cal)
    back = load_calibration(tmp_path / "c.xml")
    for a, b in ((cal.left_map, back.left_map), (cal.right_map, back.right_map)):
        assert a.map_x.tobytes() == b.map_x.tobytes() and a.map_y.tobytes() == b.map_y.tobytes()
    np.testing.assert_array_equal(back.result.left.as_array(), cal.result.left.as_array())
    np.testing.assert_array_equal(back.result.stereo.rotation, cal.result.stereo.rotation)
    np.testing.assert_array_equal(back.rectified.rot_left, cal.rectified.rot_left)
    assert back.result.rms_reprojection == cal.result.rms_reprojection
    assert back.result.view_poses.keys() == cal.result.view_poses.keys()


def test_truncated_calibration_file(tmp_path):
    save_calibration(tmp_path / "c.xml", full_calibration((80, 60)))
    text = (tmp_path / "c.xml").read_text()
    cut = text.index("<stereoMapR_x") + 200
    (tmp_path / "t.xml").write_text(text[:cut])
    with pytest.raises(FormatError) as exc:
        load_calibration(tmp_path / "t.xml")
    assert exc.value.node == "stereoMapR_x"
    assert "stereoMapR_y" in str(exc.value)
    assert exc.value.line is not None


def test_calibration_node_value_count(tmp_path):
    save_calibration(tmp_path / "c.xml", full_calibration((80, 60)))
    text = (tmp_path / "c.xml").read_text().replace("<rows>3</rows>\n  <cols>3</cols>", "<rows>3</rows>\n  <cols>4</cols>", 1)
    (tmp_path / "b.xml").write_text(text)
    with pytest.raises(FormatError) as exc:
        load_calibration(tmp_path / "b.xml")
    assert exc.value.node == "stereo_R"


def test_maps_mismatching_frame_size(tmp_path):
    save_calibration(tmp_path / "c.xml", full_calibration((80, 60)))
    cal = load_calibration(tmp_path / "c.xml")
    with pytest.raises(DimensionMismatch):
        remap(np.zeros((480, 640), np.uint8), cal.left_map)
    results = list(run_pipeline(PipelineConfig(), SyntheticSource(_scene(), 2), calibration=cal))
    assert all("DimensionMismatch" in r.error for r in results)
