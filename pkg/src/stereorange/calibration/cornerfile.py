"""Corner-list text files: ``view_id camera grid_row grid_col x y`` per line."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import FormatError, PreconditionError
from .stereo import BoardSpec, Camera, CornerObservation


def read_corner_file(path, board: BoardSpec) -> list[CornerObservation]:
    grids: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise FormatError(f"expected 6 fields, got {len(parts)}", line=lineno)
        try:
            view = int(parts[0])
            cam = Camera.parse(parts[1])
            r, c = int(parts[2]), int(parts[3])
            x, y = float(parts[4]), float(parts[5])
        except (ValueError, PreconditionError) as exc:
            raise FormatError(str(exc), line=lineno) from None
        if not (0 <= r < board.inner_rows and 0 <= c < board.inner_cols):
            raise FormatError(f"grid index ({r}, {c}) outside board", line=lineno)
        grid = grids.setdefault((view, cam), np.full((board.inner_rows, board.inner_cols, 2), np.nan))
        grid[r, c] = (x, y)
    out = []
    for (view, cam), grid in sorted(grids.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        if np.isnan(grid).any():
            missing = int(np.isnan(grid[..., 0]).sum())
            raise FormatError(f"view {view}/{cam.value} is missing {missing} corner(s)")
        out.append(CornerObservation(view, cam, grid.reshape(-1, 2)))
    return out


def write_corner_file(path, observations, board: BoardSpec) -> None:
    lines = ["# view_id camera grid_row grid_col x y"]
    for o in observations:
        for i, (x, y) in enumerate(o.corners):
            r, c = divmod(i, board.inner_cols)
            lines.append(f"{o.view_id} {o.camera.value} {r} {c} {float(x)!r} {float(y)!r}")
    Path(path).write_text("\n".join(lines) + "\n")
