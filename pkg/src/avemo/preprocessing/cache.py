"""Content-addressed feature cache.

One file per utterance per feature kind. Keys hash the raw media bytes
together with the preprocessing config hash, so any change to either
produces a new entry. Writes go through a temp file and an atomic
rename, which tolerates concurrent writers racing on the same key.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from avemo.core.records import UtteranceRecord
from avemo.errors import MissingMedia
from avemo.preprocessing.audio import MelConfig, compute_log_mel, read_wav
from avemo.preprocessing.video import FaceDetector, VideoConfig, crop_sequence, load_frames


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dir_digest(path: Path) -> str:
    """Digest of a frame directory: file names and contents, sorted."""
    h = hashlib.sha256()
    for f in sorted(path.iterdir()):
        h.update(f.name.encode())
        h.update(file_digest(f).encode())
    return h.hexdigest()


class FeatureCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def key(self, media_path: Path, config_hash: str, kind: str) -> str:
        media_hash = dir_digest(media_path) if media_path.is_dir() else file_digest(media_path)
        return hashlib.sha256(f"{kind}:{config_hash}:{media_hash}".encode()).hexdigest()

    def path_for(self, key: str) -> Path:
        return self.root / f"{key}.npz"

    def has(self, key: str) -> bool:
        return self.path_for(key).exists()

    def put(self, key: str, array: np.ndarray, meta: dict) -> Path:
        target = self.path_for(key)
        if target.exists():
            return target
        fd, tmp_name = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                np.savez(fh, array=array, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))
            os.replace(tmp_name, target)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
        return target

    def get(self, key: str) -> tuple[np.ndarray, dict] | None:
        target = self.path_for(key)
        if not target.exists():
            return None
        with np.load(target) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            return data["array"], meta


def preprocess_utterance(
    rec: UtteranceRecord,
    base_dir: Path,
    cache: FeatureCache,
    mel_cfg: MelConfig | None = None,
    video_cfg: VideoConfig | None = None,
    detector: FaceDetector | None = None,
) -> dict:
    """Compute and cache features for one utterance.

    Returns ``{"mel": key}`` and/or ``{"crops": key}`` depending on the
    media present. Re-running with unchanged inputs and configs hits the
    cache and writes nothing.
    """
    mel_cfg = mel_cfg or MelConfig()
    video_cfg = video_cfg or VideoConfig()
    out: dict[str, str] = {}

    if rec.audio_ref:
        audio_path = base_dir / rec.audio_ref
        if not audio_path.exists():
            raise MissingMedia(f"missing audio {audio_path}")
        key = cache.key(audio_path, mel_cfg.config_hash(), "mel")
        if not cache.has(key):
            waveform, sr = read_wav(audio_path)
            mel = compute_log_mel(waveform, sr, mel_cfg)
            cache.put(key, mel, {"kind": "mel", "shape": list(mel.shape), "config": mel_cfg.config_hash()})
        out["mel"] = key

    if rec.video_ref:
        video_path = base_dir / rec.video_ref
        if not video_path.exists():
            raise MissingMedia(f"missing video {video_path}")
        key = cache.key(video_path, video_cfg.config_hash(), "crops")
        if not cache.has(key):
            frames, fps = load_frames(video_path)
            seq, _ = crop_sequence(frames, fps, detector, video_cfg)
            meta = {
                "kind": "crops",
                "shape": list(seq.crops.shape),
                "config": video_cfg.config_hash(),
                "source_frame_indices": list(seq.source_frame_indices),
                "fps": seq.fps,
            }
            cache.put(key, seq.crops, meta)
        out["crops"] = key

    return out
