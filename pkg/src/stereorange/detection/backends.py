"""Detector backends.

A backend is anything with ``load()`` and ``infer(frame) -> list[Detection]``.
``detect`` wraps a backend and enforces the output ordering contract.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Protocol

import numpy as np

from ..errors import BackendLoadFailure, InferenceFailure
from .fiducial import FiducialConfig, detect_fiducial
from .types import BoundingBox, Detection


class DetectorBackend(Protocol):
    name: str

    def load(self) -> None: ...

    def infer(self, frame) -> list[Detection]: ...


def detect(frame, backend: DetectorBackend) -> list[Detection]:
    """Run ``backend`` and sort by descending confidence (ties: left to right)."""
    try:
        dets = backend.infer(frame)
    except (BackendLoadFailure, InferenceFailure):
        raise
    except Exception as exc:  # backend-internal failure
        raise InferenceFailure(f"{backend.name}: {exc}") from exc
    return sorted(dets, key=lambda d: (-d.confidence, d.bbox.x_min, d.bbox.y_min))


class FiducialBackend:
    name = "fiducial"

    def __init__(self, cfg: FiducialConfig = FiducialConfig()):
        self.cfg = cfg

    def load(self) -> None:
        pass

    def infer(self, frame) -> list[Detection]:
        return detect_fiducial(_gray(frame), self.cfg)


class MockVehicleBackend:
    """Deterministic stand-in for a neural detector.

    Finds blobs like the fiducial backend and names them by shape: wide
    blobs are ``car``, tall blobs ``motorbike``. Confidence is the fill ratio.
    """

    name = "mock"

    def __init__(self, cfg: FiducialConfig = FiducialConfig(), score_threshold: float = 0.0):
        self.cfg = cfg
        self.score_threshold = score_threshold

    def load(self) -> None:
        pass

    def infer(self, frame) -> list[Detection]:
        out = []
        for d in detect_fiducial(_gray(frame), self.cfg):
            label = "car" if d.bbox.width >= d.bbox.height else "motorbike"
            if d.confidence >= self.score_threshold:
                out.append(Detection(label, d.confidence, d.bbox, d.center))
        return out


def _gray(frame) -> np.ndarray:
    img = np.asarray(frame)
    if img.ndim == 3:
        img = img.mean(axis=2).astype(img.dtype)
    return img


def read_labels(path) -> list[str]:
    return [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]


def nms(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float) -> list[int]:
    """Greedy non-maximum suppression over (N, 4) xyxy boxes; returns kept indices."""
    order = np.argsort(-scores, kind="stable")
    x0, y0, x1, y1 = boxes.T
    area = np.maximum(x1 - x0, 0) * np.maximum(y1 - y0, 0)
    keep = []
    while order.size:
        i = order[0]
        keep.append(int(i))
        rest = order[1:]
        iw = np.maximum(0.0, np.minimum(x1[i], x1[rest]) - np.maximum(x0[i], x0[rest]))
        ih = np.maximum(0.0, np.minimum(y1[i], y1[rest]) - np.maximum(y0[i], y0[rest]))
        inter = iw * ih
        iou = inter / np.maximum(area[i] + area[rest] - inter, 1e-12)
        order = rest[iou <= iou_threshold]
    return keep


def decode_yolo(output, labels, score_threshold=0.5, iou_threshold=0.45, scale=(1.0, 1.0), frame_size=None):
    """Decode a raw YOLO head into detections.

    Accepts the anchor-free layout ``(1, 4 + C, N)`` and the objectness
    layout ``(1, N, 5 + C)``; boxes are ``cx, cy, w, h`` in network input
    pixels and are scaled back by ``scale`` = (sx, sy).
    """
    arr = np.asarray(output, dtype=np.float64)
    arr = arr.reshape(arr.shape[-2], arr.shape[-1]) if arr.ndim == 3 else arr
    nc = len(labels)
    if arr.shape[0] == 4 + nc and arr.shape[1] != 4 + nc:
        arr = arr.T
        boxes, cls = arr[:, :4], arr[:, 4:]
        scores_all = cls
    elif arr.shape[1] == 5 + nc:
        boxes, obj, cls = arr[:, :4], arr[:, 4:5], arr[:, 5:]
        scores_all = obj * cls
    elif arr.shape[1] == 4 + nc:
        boxes, scores_all = arr[:, :4], arr[:, 4:]
    else:
        raise InferenceFailure(f"unexpected output shape {arr.shape} for {nc} classes")
    cls_id = scores_all.argmax(axis=1)
    score = scores_all[np.arange(len(arr)), cls_id]
    sel = score >= score_threshold
    boxes, cls_id, score = boxes[sel], cls_id[sel], score[sel]
    sx, sy = scale
    xyxy = np.column_stack(
        [
            (boxes[:, 0] - boxes[:, 2] / 2) * sx,
            (boxes[:, 1] - boxes[:, 3] / 2) * sy,
            (boxes[:, 0] + boxes[:, 2] / 2) * sx,
            (boxes[:, 1] + boxes[:, 3] / 2) * sy,
        ]
    )
    out = []
    for c in np.unique(cls_id):
        ids = np.flatnonzero(cls_id == c)
        for k in nms(xyxy[ids], score[ids], iou_threshold):
            i = ids[k]
            box = BoundingBox(*map(float, xyxy[i]))
            if frame_size is not None:
                try:
                    box = box.clamped(*frame_size)
                except Exception:
                    continue
            out.append(Detection(labels[int(c)], float(min(max(score[i], 0.0), 1.0)), box))
    return out


class OnnxBackend:
    """YOLO-style detector loaded from an ONNX file through OpenCV's DNN module.

    One instance must not run two inferences at once; a lock enforces this.
    """

    name = "onnx"

    def __init__(self, model_path, labels_path, score_threshold=0.5, nms_iou=0.45, input_size=640):
        self.model_path = Path(model_path)
        self.labels_path = Path(labels_path)
        self.score_threshold = score_threshold
        self.nms_iou = nms_iou
        self.input_size = input_size
        self._net = None
        self._labels: list[str] = []
        self._lock = threading.Lock()

    def load(self) -> None:
        try:
            import cv2
        except ImportError as exc:
            raise BackendLoadFailure("OpenCV (cv2) is required for the onnx backend") from exc
        if not self.model_path.is_file():
            raise BackendLoadFailure(f"model file not found: {self.model_path}")
        if not self.labels_path.is_file():
            raise BackendLoadFailure(f"label file not found: {self.labels_path}")
        self._labels = read_labels(self.labels_path)
        if not self._labels:
            raise BackendLoadFailure(f"label file is empty: {self.labels_path}")
        try:
            self._net = cv2.dnn.readNetFromONNX(str(self.model_path))
        except Exception as exc:
            raise BackendLoadFailure(f"cannot load {self.model_path}: {exc}") from exc

    def infer(self, frame) -> list[Detection]:
        if self._net is None:
            raise InferenceFailure("backend not loaded")
        import cv2

        img = np.asarray(frame)
        if img.ndim == 2:
            img = np.repeat(img[..., None], 3, axis=2)
        h, w = img.shape[:2]
        s = self.input_size
        blob = cv2.dnn.blobFromImage(img, 1 / 255.0, (s, s), swapRB=True, crop=False)
        with self._lock:
            try:
                self._net.setInput(blob)
                out = self._net.forward()
            except Exception as exc:
                raise InferenceFailure(str(exc)) from exc
        return decode_yolo(out, self._labels, self.score_threshold, self.nms_iou, (w / s, h / s), (w, h))
