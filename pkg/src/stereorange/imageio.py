"""8-bit grayscale portable-graymap (binary P5) files."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError


def write_pgm(path, image) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("expected a 2-D grayscale image")
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    Image.fromarray(img).save(Path(path), format="PPM")


def read_pgm(path) -> np.ndarray:
    try:
        with Image.open(Path(path)) as im:
            if im.mode != "L":
                raise FormatError(f"{path}: expected 8-bit grayscale, got mode {im.mode}")
            return np.array(im, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: {exc}") from None
