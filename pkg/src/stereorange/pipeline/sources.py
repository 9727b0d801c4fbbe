"""Frame sources yielding synchronized left/right frames."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Protocol

import numpy as np

from ..errors import FormatError, PreconditionError
from ..imageio import read_pgm
from ..synthsim import SyntheticScene, read_scene, render_stereo

IMAGE_SUFFIXES = (".pgm", ".png")


@dataclass(frozen=True, eq=False)
class Frame:
    index: int
    timestamp_ms: float
    left: np.ndarray
    right: np.ndarray


class FrameSource(Protocol):
    unbounded: bool

    def __iter__(self) -> Iterator[Frame]: ...


class DirectorySource:
    """Pairs ``left/<name>`` with ``right/<name>``, in sorted name order."""

    unbounded = False

    def __init__(self, root, fps: float = 20.0):
        self.root = Path(root)
        self.fps = fps
        ldir, rdir = self.root / "left", self.root / "right"
        if not ldir.is_dir() or not rdir.is_dir():
            raise PreconditionError(f"{self.root} needs left/ and right/ subdirectories")
        lnames = sorted(p.name for p in ldir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        rnames = {p.name for p in rdir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES}
        missing = [n for n in lnames if n not in rnames]
        if missing or len(rnames) != len(lnames):
            raise FormatError(f"left/right frame names differ in {self.root}")
        self.names = lnames

    def __len__(self):
        return len(self.names)

    def __iter__(self) -> Iterator[Frame]:
        shape = None
        for i, name in enumerate(self.names):
            left = _read(self.root / "left" / name)
            right = _read(self.root / "right" / name)
            if left.shape != right.shape or (shape is not None and left.shape != shape):
                raise FormatError(f"frame {name}: inconsistent dimensions")
            shape = left.shape
            yield Frame(i, i * 1000.0 / self.fps, left, right)


def _read(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    from PIL import Image

    with Image.open(path) as im:
        return np.array(im.convert("L"))


class SyntheticSource:
    """Renders a scene once and repeats it ``n_frames`` times."""

    unbounded = False

    def __init__(self, scene: SyntheticScene | str | Path, n_frames: int = 10, fps: float = 20.0):
        self.scene = scene if isinstance(scene, SyntheticScene) else read_scene(scene)
        self.n_frames = n_frames
        self.fps = fps
        left, right, self.truth = render_stereo(self.scene)
        left.setflags(write=False)
        right.setflags(write=False)
        self._pair = (left, right)

    def __len__(self):
        return self.n_frames

    def __iter__(self) -> Iterator[Frame]:
        for i in range(self.n_frames):
            yield Frame(i, i * 1000.0 / self.fps, *self._pair)


class CameraSource:
    """Two live cameras through OpenCV. Thin adapter; unbounded."""

    unbounded = True

    def __init__(self, left_device: int = 1, right_device: int = 0, fps: float = 20.0):
        self.devices = (left_device, right_device)
        self.fps = fps

    def __iter__(self) -> Iterator[Frame]:
        import time

        import cv2

        caps = [cv2.VideoCapture(d) for d in self.devices]
        try:
            for cap in caps:
                if not cap.isOpened():
                    raise PreconditionError("camera device could not be opened")
                cap.set(cv2.CAP_PROP_FPS, self.fps)
            t0 = time.monotonic()
            i = 0
            while True:
                frames = []
                for cap in caps:
                    ok, img = cap.read()
                    if not ok:
                        return
                    frames.append(cv2.cvtColor(img, cv2.COLOR_BGR2GRAY))
                yield Frame(i, (time.monotonic() - t0) * 1000.0, frames[0], frames[1])
                i += 1
        finally:
            for cap in caps:
                cap.release()


def open_source(spec: str, frames: int = 10, fps: float = 20.0) -> FrameSource:
    kind, _, path = spec.partition(":")
    if kind == "dir":
        return DirectorySource(path, fps)
    if kind == "scene":
        return SyntheticSource(path, frames, fps)
    raise PreconditionError(f"unknown source spec {spec!r}")
