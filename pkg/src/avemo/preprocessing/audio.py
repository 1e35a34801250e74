"""WAV loading and the log-mel front end.

The mel framing convention is pinned so frame counts are exact: the
waveform is center-padded by ``window // 2`` on each side (reflected,
or edge-padded for very short inputs) and frame ``t`` covers original
samples ``[t*hop - window/2, t*hop + window/2)``. The frame count is
exactly ``len(waveform) // hop``, so doubling the input length doubles
the frame count.
"""

from __future__ import annotations

import hashlib
import json
import wave
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from avemo.errors import DecodeError, EmptyAudio, SampleRateMismatch


@dataclass(frozen=True)
class MelConfig:
    sample_rate_hz: int = 16000
    n_mels: int = 80
    window_samples: int = 400
    hop_samples: int = 160
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.hop_samples > self.window_samples:
            raise ValueError("hop_samples must be <= window_samples")
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read 16-bit PCM WAV into float32 in [-1, 1] (stereo is averaged)."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getsampwidth() != 2:
                raise DecodeError(f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit")
            n_channels = wf.getnchannels()
            sample_rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise DecodeError(f"{path}: {exc or 'truncated file'}") from exc
    data = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    if data.size == 0:
        raise EmptyAudio(f"{path}: no samples")
    return data, sample_rate


def write_wav(path: str | Path, waveform: np.ndarray, sample_rate: int):
    """Write float waveform in [-1, 1] as 16-bit PCM WAV."""
    samples = np.clip(np.asarray(waveform, dtype=np.float64), -1.0, 1.0)
    pcm = (samples * 32767.0).round().astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular HTK-scale filters, (n_mels, n_fft // 2 + 1)."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    f_max = sample_rate / 2.0
    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(f_max), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bins = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)

    fb = np.zeros((n_mels, bins.size), dtype=np.float64)
    for i in range(n_mels):
        left, center, right = hz_points[i], hz_points[i + 1], hz_points[i + 2]
        up = (bins - left) / max(center - left, 1e-12)
        down = (right - bins) / max(right - center, 1e-12)
        fb[i] = np.maximum(0.0, np.minimum(up, down))
    return fb


def compute_log_mel(waveform: np.ndarray, sample_rate: int, cfg: MelConfig | None = None) -> np.ndarray:
    """Log-mel spectrogram, shape (len(waveform) // hop, n_mels).

    Values are natural logs of mel energies clamped below at
    ``cfg.log_floor``. Raises :class:`EmptyAudio` for inputs shorter than
    one hop and :class:`SampleRateMismatch` when the rate differs from
    the config (resampling is a separate preprocessing step).
    """
    cfg = cfg or MelConfig()
    waveform = np.asarray(waveform, dtype=np.float64).reshape(-1)
    if waveform.size == 0:
        raise EmptyAudio("empty waveform")
    if sample_rate != cfg.sample_rate_hz:
        raise SampleRateMismatch(
            f"expected {cfg.sample_rate_hz} Hz, got {sample_rate} Hz",
            expected=cfg.sample_rate_hz,
            actual=sample_rate,
        )
    n_frames = waveform.size // cfg.hop_samples
    if n_frames == 0:
        raise EmptyAudio(f"waveform shorter than one hop ({cfg.hop_samples} samples)")

    pad = cfg.window_samples // 2
    mode = "reflect" if waveform.size > pad else "edge"
    padded = np.pad(waveform, pad, mode=mode)

    # periodic Hann, matching common STFT front ends
    n = np.arange(cfg.window_samples)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / cfg.window_samples)

    offsets = np.arange(n_frames) * cfg.hop_samples
    idx = offsets[:, None] + np.arange(cfg.window_samples)[None, :]
    frames = padded[idx] * window

    spectrum = np.fft.rfft(frames, n=cfg.window_samples, axis=1)
    power = np.abs(spectrum) ** 2
    fb = mel_filterbank(cfg.n_mels, cfg.window_samples, cfg.sample_rate_hz)
    mel = power @ fb.T
    return np.log(np.maximum(mel, cfg.log_floor)).astype(np.float32)
