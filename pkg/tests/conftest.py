import numpy as np
import pytest

from stereorange.calibration import BoardSpec
from stereorange.geometry import CameraIntrinsics, Pose, StereoRig

_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    n, text = crit
    if report.when == "call" or report.outcome != "passed":
        ok = report.outcome == "passed"
        prev = _criteria.get(n, (text, True))
        _criteria[n] = (text, prev[1] and ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        text, ok = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")


@pytest.fixture
def board():
    return BoardSpec(6, 9, 2.5)


@pytest.fixture
def calib_rig():
    left = CameraIntrinsics(800, 810, 320, 240, (-0.12, 0.05, 0.001, -0.0005, 0.0))
    right = CameraIntrinsics(790, 805, 315, 245, (-0.1, 0.03, -0.0008, 0.0004, 0.0))
    return StereoRig(left, right, Pose.from_rvec([0.01, -0.02, 0.005], [-9, 0.1, 0.2]), (640, 480))
