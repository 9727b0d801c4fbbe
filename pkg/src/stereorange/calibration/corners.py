"""Sub-pixel chessboard corner refinement.

Each corner is moved to the point ``p`` that minimizes
``sum_q w_q (grad I(q) . (q - p))**2`` over a window around the current
estimate: at a saddle every image gradient is orthogonal to the vector
from the saddle to its pixel. The window is resampled bilinearly around
each new estimate until the update falls below ``eps``.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import map_coordinates

from ..errors import FlatRegion, OutOfBounds, PreconditionError
from ..geometry import ImagePoint


def _refine_one(img, x, y, window, max_iter, eps, weights, offsets):
    h, w = img.shape
    n = 2 * window + 3
    for _ in range(max_iter):
        if x - window - 1 < 0 or y - window - 1 < 0 or x + window + 1 > w - 1 or y + window + 1 > h - 1:
            raise OutOfBounds(f"window around ({x:.3f}, {y:.3f}) leaves the image")
        rows = y + offsets[:, None]
        cols = x + offsets[None, :]
        patch = map_coordinates(
            img, [np.broadcast_to(rows, (n, n)), np.broadcast_to(cols, (n, n))], order=1, mode="nearest"
        )
        gx = 0.5 * (patch[1:-1, 2:] - patch[1:-1, :-2])
        gy = 0.5 * (patch[2:, 1:-1] - patch[:-2, 1:-1])
        qx = cols[:, 1:-1].repeat(n - 2, axis=0)
        qy = rows[1:-1, :].repeat(n - 2, axis=1)
        gxx = weights * gx * gx
        gxy = weights * gx * gy
        gyy = weights * gy * gy
        a, b, c = gxx.sum(), gxy.sum(), gyy.sum()
        trace = a + c
        if trace <= 1e-12:
            raise FlatRegion(f"no gradient energy around ({x:.3f}, {y:.3f})")
        det = a * c - b * b
        if det <= 1e-12 * trace * trace:
            raise FlatRegion(f"gradient structure is rank-deficient around ({x:.3f}, {y:.3f})")
        bx = (gxx * qx + gxy * qy).sum()
        by = (gxy * qx + gyy * qy).sum()
        nx = (c * bx - b * by) / det
        ny = (a * by - b * bx) / det
        step = np.hypot(nx - x, ny - y)
        x, y = nx, ny
        if step < eps:
            break
    return x, y


def refine_corners_subpixel(image, guesses, window: int = 5, max_iter: int = 30, eps: float = 1e-3) -> list[ImagePoint]:
    """Refine corner guesses to sub-pixel accuracy on a grayscale raster."""
    if window < 2:
        raise PreconditionError("window half-size must be >= 2")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise PreconditionError("expected a grayscale raster")
    offsets = np.arange(-window - 1, window + 2, dtype=np.float64)
    inner = offsets[1:-1]
    r2 = inner[:, None] ** 2 + inner[None, :] ** 2
    weights = np.exp(-r2 / (window * window))
    out = []
    for gx, gy in guesses:
        x, y = _refine_one(img, float(gx), float(gy), window, max_iter, eps, weights, offsets)
        out.append(ImagePoint(float(x), float(y)))
    return out
