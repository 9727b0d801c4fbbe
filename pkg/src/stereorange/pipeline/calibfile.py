"""Calibration file in OpenCV FileStorage XML layout.

Every node is a matrix with ``rows``, ``cols``, ``dt`` and row-major
``data``. The four remap tables are stored as ``stereoMapL_x``,
``stereoMapL_y``, ``stereoMapR_x`` and ``stereoMapR_y`` (dt ``f``, printed
with 9 significant digits, which round-trips float32 exactly); every other
parameter is dt ``d`` printed with 17 significant digits.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..calibration.stereo import CalibrationResult, Camera
from ..errors import FormatError
from ..geometry import CameraIntrinsics, Pose
from ..rectification import RectifiedRig, RemapTable

MAP_NODES = ("stereoMapL_x", "stereoMapL_y", "stereoMapR_x", "stereoMapR_y")
REQUIRED = ("image_size", "left_intrinsics", "right_intrinsics", "stereo_R", "stereo_T", "rms_reprojection")


@dataclass(frozen=True, eq=False)
class StereoCalibration:
    result: CalibrationResult
    image_size: tuple[int, int]
    rectified: RectifiedRig | None = None
    left_map: RemapTable | None = None
    right_map: RemapTable | None = None

    @property
    def has_maps(self) -> bool:
        return self.left_map is not None and self.right_map is not None


def _node(name: str, arr: np.ndarray, dt: str) -> str:
    arr = np.atleast_2d(arr)
    rows, cols = arr.shape
    fmt = "%.9g" if dt == "f" else "%.17g"
    line = " ".join([fmt] * cols)
    body = "\n".join(line % tuple(row) for row in arr.tolist())
    return (
        f'<{name} type_id="opencv-matrix">\n'
        f"  <rows>{rows}</rows>\n  <cols>{cols}</cols>\n  <dt>{dt}</dt>\n"
        f"  <data>\n{body}</data></{name}>\n"
    )


def save_calibration(path, cal: StereoCalibration) -> None:
    res = cal.result
    parts = ['<?xml version="1.0"?>\n<opencv_storage>\n']
    parts.append(_node("image_size", np.array([cal.image_size], dtype=float), "d"))
    parts.append(_node("left_intrinsics", res.left.as_array(), "d"))
    parts.append(_node("right_intrinsics", res.right.as_array(), "d"))
    parts.append(_node("stereo_R", res.stereo.rotation, "d"))
    parts.append(_node("stereo_T", res.stereo.translation.reshape(3, 1), "d"))
    parts.append(_node("rms_reprojection", np.array([[res.rms_reprojection]]), "d"))
    for (view, cam), pose in sorted(res.view_poses.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        parts.append(_node(f"view_{view}_{cam.value}", np.column_stack([pose.rotation, pose.translation]), "d"))
    if cal.rectified is not None:
        r = cal.rectified
        parts.append(_node("rect_R_left", r.rot_left, "d"))
        parts.append(_node("rect_R_right", r.rot_right, "d"))
        parts.append(_node("rect_intrinsics", r.new_intrinsics.as_array(), "d"))
        parts.append(_node("rect_baseline", np.array([[r.baseline]]), "d"))
    if cal.has_maps:
        for name, table, attr in (
            ("stereoMapL_x", cal.left_map, "map_x"),
            ("stereoMapL_y", cal.left_map, "map_y"),
            ("stereoMapR_x", cal.right_map, "map_x"),
            ("stereoMapR_y", cal.right_map, "map_y"),
        ):
            parts.append(_node(name, getattr(table, attr), "f"))
    parts.append("</opencv_storage>\n")
    Path(path).write_text("".join(parts))


def _line_of(text: str, name: str) -> int | None:
    i = text.find(f"<{name} ")
    return None if i < 0 else text.count("\n", 0, i) + 1


def _open_node_at(text: str, line: int) -> str | None:
    cut = sum(len(ln) + 1 for ln in text.split("\n")[: line - 1])
    names = re.findall(r'<(\w+) type_id="opencv-matrix">', text[: max(cut, 0) + 1])
    return names[-1] if names else None


def _parse_matrix(text: str, el: ET.Element) -> np.ndarray:
    name = el.tag
    line = _line_of(text, name)
    try:
        rows = int(el.findtext("rows"))
        cols = int(el.findtext("cols"))
        dt = el.findtext("dt").strip()
        raw = el.findtext("data").split()
    except (TypeError, ValueError, AttributeError):
        raise FormatError("node lacks rows/cols/dt/data", node=name, line=line) from None
    if len(raw) != rows * cols:
        raise FormatError(f"expected {rows * cols} values, found {len(raw)}", node=name, line=line)
    try:
        data = np.array(raw, dtype=np.float32 if dt == "f" else np.float64)
    except ValueError as exc:
        raise FormatError(f"bad number: {exc}", node=name, line=line) from None
    return data.reshape(rows, cols)


def load_calibration(path) -> StereoCalibration:
    text = Path(path).read_text()
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line = exc.position[0]
        node = _open_node_at(text, line)
        present = set(re.findall(r'<(\w+) type_id="opencv-matrix">', text))
        missing = [n for n in REQUIRED + MAP_NODES if n not in present]
        msg = f"malformed or truncated file ({exc})"
        if node is not None:
            msg += f"; node {node!r} is incomplete"
        if missing:
            msg += f"; missing nodes: {', '.join(missing)}"
        raise FormatError(msg, node=node or (missing[0] if missing else None), line=line) from None
    nodes = {el.tag: _parse_matrix(text, el) for el in root}
    for name in REQUIRED:
        if name not in nodes:
            raise FormatError("required node missing", node=name)

    def shaped(name, shape):
        a = nodes[name]
        if a.size != int(np.prod(shape)):
            raise FormatError(f"expected {shape} values", node=name, line=_line_of(text, name))
        return a.reshape(shape).astype(np.float64)

    w, h = (int(v) for v in shaped("image_size", (2,)))
    left = CameraIntrinsics.from_array(shaped("left_intrinsics", (9,)))
    right = CameraIntrinsics.from_array(shaped("right_intrinsics", (9,)))
    stereo = Pose(shaped("stereo_R", (3, 3)), shaped("stereo_T", (3,)))
    poses = {}
    for name in nodes:
        m = re.fullmatch(r"view_(-?\d+)_([LR])", name)
        if m:
            M = shaped(name, (3, 4))
            poses[(int(m.group(1)), Camera(m.group(2)))] = Pose(M[:, :3], M[:, 3])
    result = CalibrationResult(left, right, poses, stereo, float(shaped("rms_reprojection", (1,))[0]))
    rect = None
    if "rect_R_left" in nodes:
        for name in ("rect_R_right", "rect_intrinsics", "rect_baseline"):
            if name not in nodes:
                raise FormatError("required node missing", node=name)
        rect = RectifiedRig(
            shaped("rect_R_left", (3, 3)),
            shaped("rect_R_right", (3, 3)),
            CameraIntrinsics.from_array(shaped("rect_intrinsics", (9,))),
            float(shaped("rect_baseline", (1,))[0]),
            (w, h),
        )
    maps = [n for n in MAP_NODES if n in nodes]
    lmap = rmap = None
    if maps:
        for name in MAP_NODES:
            if name not in nodes:
                raise FormatError("required node missing", node=name)
        lmap = RemapTable(nodes["stereoMapL_x"], nodes["stereoMapL_y"])
        rmap = RemapTable(nodes["stereoMapR_x"], nodes["stereoMapR_y"])
    return StereoCalibration(result, (w, h), rect, lmap, rmap)
