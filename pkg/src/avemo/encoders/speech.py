"""Speech encoder: log-mel frames to an audio feature sequence.

The builtin backbone is a small strided-convolution front end plus a
transformer encoder; it halves the time axis, so ``T_a = ceil(T / 2)``
for a ``T``-frame mel input. ``external_adapter`` mode accepts any
object with the same ``encode`` contract (mel matrix in, feature matrix
out) so a full-scale pretrained backbone can be plugged in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import torch
from torch import nn

from avemo.encoders.common import sinusoidal_positions
from avemo.errors import EmptyInput


@dataclass(frozen=True)
class SpeechEncoderConfig:
    d_audio: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_model: int = 64
    n_mels: int = 80
    backbone: str = "tiny_builtin"

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")


class SpeechBackbone(Protocol):
    """Contract an external speech backbone must satisfy."""

    def encode(self, mel: torch.Tensor) -> torch.Tensor: ...


class TinySpeechEncoder(nn.Module):
    def __init__(self, cfg: SpeechEncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.conv1 = nn.Conv1d(cfg.n_mels, cfg.d_model, kernel_size=3, stride=1, padding=1)
        self.conv2 = nn.Conv1d(cfg.d_model, cfg.d_model, kernel_size=3, stride=2, padding=1)
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.d_model,
            nhead=cfg.n_heads,
            dim_feedforward=cfg.d_model * 4,
            dropout=0.0,
            batch_first=True,
            norm_first=True,
            activation="gelu",
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=cfg.n_layers, enable_nested_tensor=False)
        self.out = nn.Linear(cfg.d_model, cfg.d_audio)

    @staticmethod
    def output_rows(n_frames: int) -> int:
        """Feature rows produced for an n_frames mel input."""
        return (n_frames + 1) // 2

    def encode(self, mel: torch.Tensor) -> torch.Tensor:
        """(T, n_mels) -> (ceil(T/2), d_audio)."""
        x = mel.t().unsqueeze(0)  # (1, n_mels, T)
        x = torch.nn.functional.gelu(self.conv1(x))
        x = torch.nn.functional.gelu(self.conv2(x))
        x = x.transpose(1, 2)  # (1, T_a, d_model)
        x = x + sinusoidal_positions(x.shape[1], self.cfg.d_model, device=x.device, dtype=x.dtype)
        x = self.encoder(x)
        return self.out(x).squeeze(0)

    forward = encode


def encode_speech(mel, encoder) -> torch.Tensor:
    """Run the encoder on one mel matrix; rejects empty input."""
    mel = torch.as_tensor(mel, dtype=next(encoder.parameters()).dtype if isinstance(encoder, nn.Module) else torch.float32)
    if mel.ndim != 2 or mel.shape[0] == 0:
        raise EmptyInput("mel input must be (frames, n_mels) with frames >= 1")
    return encoder.encode(mel)
