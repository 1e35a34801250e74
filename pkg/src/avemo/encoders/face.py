"""Face encoder: per-frame features plus query-based temporal pooling.

Frame encoding is strictly frame-local (a small conv net applied per
crop). The temporal stage holds a fixed set of learnable query vectors
that cross-attend to position-tagged frame features through a stack of
pre-norm {cross-attention, feed-forward} blocks with residuals; queries
are refined layer to layer. Output shape is always
``(n_queries, d_visual)`` regardless of clip length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import torch
from torch import nn

from avemo.encoders.common import sinusoidal_positions
from avemo.errors import EmptyInput


@dataclass(frozen=True)
class FaceEncoderConfig:
    frame_backbone: str = "tiny_builtin"
    d_frame: int = 64
    n_queries: int = 128
    d_visual: int = 64
    temporal_layers: int = 6
    temporal_heads: int = 8
    crop_size: int = 96

    def __post_init__(self):
        if self.n_queries < 1:
            raise ValueError("n_queries must be >= 1")
        if self.d_visual % self.temporal_heads != 0:
            raise ValueError("d_visual must be divisible by temporal_heads")


class FrameBackbone(Protocol):
    """Contract an external frame encoder must satisfy."""

    def encode(self, crops: torch.Tensor) -> torch.Tensor: ...


class TinyFrameEncoder(nn.Module):
    """Frame-local conv net: (N, S, S, C) crops -> (N, d_frame)."""

    def __init__(self, cfg: FaceEncoderConfig, in_channels: int = 3):
        super().__init__()
        self.cfg = cfg
        self.convs = nn.Sequential(
            nn.Conv2d(in_channels, 16, kernel_size=3, stride=2, padding=1),
            nn.GELU(),
            nn.Conv2d(16, 32, kernel_size=3, stride=2, padding=1),
            nn.GELU(),
            nn.Conv2d(32, 64, kernel_size=3, stride=2, padding=1),
            nn.GELU(),
            nn.AdaptiveAvgPool2d(3),
        )
        self.out = nn.Linear(64 * 9, cfg.d_frame)

    def encode(self, crops: torch.Tensor) -> torch.Tensor:
        x = crops.permute(0, 3, 1, 2)  # (N, C, S, S)
        x = self.convs(x)
        return self.out(x.flatten(1))

    forward = encode


class LearnableQueries(nn.Module):
    """Trainable query matrix, scaled-normal init; shape fixed at construction."""

    def __init__(self, n_queries: int, d_visual: int):
        super().__init__()
        self.values = nn.Parameter(torch.randn(n_queries, d_visual) / math.sqrt(d_visual))

    @property
    def shape(self):
        return tuple(self.values.shape)


class CrossAttention(nn.Module):
    def __init__(self, dim: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.o_proj = nn.Linear(dim, dim)

    def forward(self, queries: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        nq, dim = queries.shape
        nk = context.shape[0]
        q = self.q_proj(queries).view(nq, self.n_heads, self.head_dim).transpose(0, 1)
        k = self.k_proj(context).view(nk, self.n_heads, self.head_dim).transpose(0, 1)
        v = self.v_proj(context).view(nk, self.n_heads, self.head_dim).transpose(0, 1)
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).transpose(0, 1).reshape(nq, dim)
        return self.o_proj(out)


class PoolerBlock(nn.Module):
    """Pre-norm cross-attention + feed-forward with residuals."""

    def __init__(self, dim: int, n_heads: int, ffn_mult: int = 4):
        super().__init__()
        self.attn_norm_q = nn.LayerNorm(dim)
        self.attn_norm_kv = nn.LayerNorm(dim)
        self.attn = CrossAttention(dim, n_heads)
        self.ffn_norm = nn.LayerNorm(dim)
        self.ffn = nn.Sequential(nn.Linear(dim, dim * ffn_mult), nn.GELU(), nn.Linear(dim * ffn_mult, dim))

    def forward(self, queries: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        queries = queries + self.attn(self.attn_norm_q(queries), self.attn_norm_kv(context))
        return queries + self.ffn(self.ffn_norm(queries))


class TemporalPooler(nn.Module):
    def __init__(self, cfg: FaceEncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.input_proj = nn.Linear(cfg.d_frame, cfg.d_visual)
        self.blocks = nn.ModuleList(
            PoolerBlock(cfg.d_visual, cfg.temporal_heads) for _ in range(cfg.temporal_layers)
        )
        self.out_norm = nn.LayerNorm(cfg.d_visual)

    def forward(self, frame_features: torch.Tensor, queries: LearnableQueries) -> torch.Tensor:
        context = self.input_proj(frame_features)
        context = context + sinusoidal_positions(
            context.shape[0], self.cfg.d_visual, device=context.device, dtype=context.dtype
        )
        q = queries.values
        for block in self.blocks:
            q = block(q, context)
        return self.out_norm(q)


def temporal_pool(frame_features, queries: LearnableQueries, pooler: TemporalPooler) -> torch.Tensor:
    """(N, d_frame) frame features -> (n_queries, d_visual); rejects N == 0."""
    frame_features = torch.as_tensor(frame_features)
    if frame_features.ndim != 2 or frame_features.shape[0] == 0:
        raise EmptyInput("frame features must be (N, d_frame) with N >= 1")
    return pooler(frame_features, queries)


class FaceEncoder(nn.Module):
    """Frame backbone + learnable queries + temporal pooler."""

    def __init__(self, cfg: FaceEncoderConfig, in_channels: int = 3):
        super().__init__()
        self.cfg = cfg
        self.frame = TinyFrameEncoder(cfg, in_channels)
        self.queries = LearnableQueries(cfg.n_queries, cfg.d_visual)
        self.temporal = TemporalPooler(cfg)

    def encode_frames(self, crops) -> torch.Tensor:
        crops = torch.as_tensor(crops, dtype=next(self.parameters()).dtype)
        if crops.ndim != 4 or crops.shape[0] == 0:
            raise EmptyInput("crops must be (N, S, S, C) with N >= 1")
        return self.frame.encode(crops)

    def encode(self, crops) -> torch.Tensor:
        return temporal_pool(self.encode_frames(crops), self.queries, self.temporal)

    forward = encode
