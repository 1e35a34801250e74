"""Frame loading, temporal subsampling, and face cropping.

Video sources are either a directory of numbered PNG frames or an MP4
file (decoded with OpenCV when available). Face detection is pluggable;
the default detector never fires, so the deterministic center-square
fallback keeps the pipeline runnable with zero external model weights.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image

from avemo.errors import DecodeError, EmptyVideo, InvariantViolation

DEFAULT_CROP_SIZE = 96
DEFAULT_FRAME_STRIDE = 10
DIRECTORY_FPS = 25.0  # assumed rate for frame directories


@dataclass(frozen=True)
class FaceCropSequence:
    """Sampled, cropped face frames: (N, size, size, C) floats in [0, 1]."""

    crops: np.ndarray
    source_frame_indices: tuple[int, ...]
    fps: float

    def __post_init__(self):
        crops = np.asarray(self.crops, dtype=np.float32)
        object.__setattr__(self, "crops", crops)
        object.__setattr__(self, "source_frame_indices", tuple(self.source_frame_indices))
        if crops.ndim != 4 or crops.shape[0] < 1:
            raise InvariantViolation("crops must be (N, H, W, C) with N >= 1", field="crops")
        if crops.shape[1] != crops.shape[2]:
            raise InvariantViolation("crops must be square", field="crops")
        if len(self.source_frame_indices) != crops.shape[0]:
            raise InvariantViolation("one source index per crop", field="source_frame_indices")
        idx = self.source_frame_indices
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvariantViolation("source indices must be strictly increasing", field="source_frame_indices")


@dataclass(frozen=True)
class VideoConfig:
    crop_size: int = DEFAULT_CROP_SIZE
    frame_stride: int = DEFAULT_FRAME_STRIDE

    def config_hash(self) -> str:
        blob = json.dumps({"crop_size": self.crop_size, "frame_stride": self.frame_stride}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class FaceDetector(Protocol):
    """Returns a pixel box (x0, y0, x1, y1) or None when nothing is found."""

    def detect(self, frame: np.ndarray) -> tuple[int, int, int, int] | None: ...


class NullFaceDetector:
    """Never detects; every frame takes the center-square fallback."""

    def detect(self, frame):
        return None


_FRAME_NUM_RE = re.compile(r"(\d+)")


def _frame_sort_key(path: Path):
    match = _FRAME_NUM_RE.search(path.stem)
    return (int(match.group(1)) if match else 0, path.name)


def load_frames(path: str | Path) -> tuple[np.ndarray, float]:
    """Load a video as (N, H, W, 3) uint8 plus frames per second."""
    path = Path(path)
    if path.is_dir():
        files = sorted(
            (p for p in path.iterdir() if p.suffix.lower() == ".png"), key=_frame_sort_key
        )
        if not files:
            raise EmptyVideo(f"{path}: no PNG frames")
        frames = []
        for f in files:
            try:
                with Image.open(f) as img:
                    frames.append(np.asarray(img.convert("RGB"), dtype=np.uint8))
            except Exception as exc:
                raise DecodeError(f"{f}: {exc}") from exc
        shapes = {f.shape for f in frames}
        if len(shapes) != 1:
            raise DecodeError(f"{path}: inconsistent frame sizes {shapes}")
        return np.stack(frames), DIRECTORY_FPS

    if not path.exists():
        raise DecodeError(f"{path}: no such file")
    try:
        import cv2
    except ImportError as exc:
        raise DecodeError(f"{path}: OpenCV unavailable for container decode") from exc
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise DecodeError(f"{path}: cannot open video")
    fps = cap.get(cv2.CAP_PROP_FPS) or DIRECTORY_FPS
    frames = []
    while True:
        ok, frame = cap.read()
        if not ok:
            break
        frames.append(frame[:, :, ::-1].copy())  # BGR -> RGB
    cap.release()
    if not frames:
        raise EmptyVideo(f"{path}: decoded zero frames")
    return np.stack(frames), float(fps)


def sample_frames(n_frames: int, stride: int = DEFAULT_FRAME_STRIDE) -> list[int]:
    """Indices {0, stride, 2*stride, ...}; count is ceil(n_frames / stride)."""
    if n_frames < 1:
        raise EmptyVideo("no frames to sample")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return list(range(0, n_frames, stride))


def _resize(frame: np.ndarray, size: int) -> np.ndarray:
    img = Image.fromarray((np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8))
    out = img.resize((size, size), Image.BILINEAR)
    return np.asarray(out, dtype=np.float32) / 255.0


def crop_face(
    frame: np.ndarray, detector: FaceDetector, size: int = DEFAULT_CROP_SIZE
) -> tuple[np.ndarray, bool]:
    """Square face crop resized to ``size``; returns (crop, used_fallback).

    The detector box is expanded to a square around its center and
    clipped to the frame; with no detection a deterministic center
    square is used instead.
    """
    if frame.ndim == 2:
        frame = frame[:, :, None]
    h, w = frame.shape[:2]
    if h < 1 or w < 1:
        raise EmptyVideo("frame has no pixels")
    if frame.dtype == np.uint8:
        frame = frame.astype(np.float32) / 255.0

    box = detector.detect(frame)
    fallback = box is None
    if fallback:
        side = min(h, w)
        x0 = (w - side) // 2
        y0 = (h - side) // 2
    else:
        bx0, by0, bx1, by1 = box
        cx = (bx0 + bx1) / 2.0
        cy = (by0 + by1) / 2.0
        side = min(max(bx1 - bx0, by1 - by0), min(h, w))
        x0 = int(round(cx - side / 2.0))
        y0 = int(round(cy - side / 2.0))
        x0 = min(max(x0, 0), w - side)
        y0 = min(max(y0, 0), h - side)
    crop = frame[y0 : y0 + side, x0 : x0 + side]
    return _resize(crop, size), fallback


def crop_sequence(
    frames: np.ndarray,
    fps: float,
    detector: FaceDetector | None = None,
    cfg: VideoConfig | None = None,
) -> tuple[FaceCropSequence, int]:
    """Sample, crop, and stack a frame sequence; returns (crops, fallback count)."""
    cfg = cfg or VideoConfig()
    detector = detector or NullFaceDetector()
    indices = sample_frames(len(frames), cfg.frame_stride)
    crops = []
    fallbacks = 0
    for i in indices:
        crop, used_fallback = crop_face(frames[i], detector, cfg.crop_size)
        fallbacks += int(used_fallback)
        crops.append(crop)
    seq = FaceCropSequence(crops=np.stack(crops), source_frame_indices=tuple(indices), fps=fps)
    return seq, fallbacks
