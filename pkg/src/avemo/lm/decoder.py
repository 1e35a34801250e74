"""Tiny causal transformer decoder over embedding sequences.

The decoder consumes pre-assembled embedding rows (text token
embeddings and projected encoder features look the same to it). A
learned start-of-sequence embedding is prepended internally, so for an
input of length L the head emits L + 1 rows: row ``t <= L-1`` is the
distribution for position ``t`` given strictly earlier positions, and
row ``L`` is the next-token distribution used by generation.

Attention projections are named modules (``q_proj`` etc.) so low-rank
adapters can wrap them individually. ``external_adapter`` mode is a
contract for swapping in a full-scale pretrained decoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from avemo.encoders.common import sinusoidal_positions


@dataclass(frozen=True)
class DecoderConfig:
    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 4
    vocab_size: int = 265
    context_len: int = 4096
    ffn_mult: int = 4
    backbone: str = "tiny_builtin"

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")


class CausalSelfAttention(nn.Module):
    def __init__(self, cfg: DecoderConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.head_dim = cfg.d_model // cfg.n_heads
        self.q_proj = nn.Linear(cfg.d_model, cfg.d_model)
        self.k_proj = nn.Linear(cfg.d_model, cfg.d_model)
        self.v_proj = nn.Linear(cfg.d_model, cfg.d_model)
        self.o_proj = nn.Linear(cfg.d_model, cfg.d_model)

    def forward(self, x: torch.Tensor, attn_mask=None, past=None):
        """x: (B, L, d). past: optional (k, v) cache, each (B, H, P, hd)."""
        bsz, L, dim = x.shape
        q = self.q_proj(x).view(bsz, L, self.n_heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(x).view(bsz, L, self.n_heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(x).view(bsz, L, self.n_heads, self.head_dim).transpose(1, 2)
        if past is not None:
            pk, pv = past
            k = torch.cat([pk, k], dim=2)
            v = torch.cat([pv, v], dim=2)
        new_past = (k, v)
        if attn_mask is not None:
            out = F.scaled_dot_product_attention(q, k, v, attn_mask=attn_mask)
        else:
            # cached single-step or full-prefix call decides causality
            out = F.scaled_dot_product_attention(q, k, v, is_causal=past is None and L > 1)
        out = out.transpose(1, 2).reshape(bsz, L, dim)
        return self.o_proj(out), new_past


class DecoderBlock(nn.Module):
    def __init__(self, cfg: DecoderConfig):
        super().__init__()
        self.attn_norm = nn.LayerNorm(cfg.d_model)
        self.attn = CausalSelfAttention(cfg)
        self.ffn_norm = nn.LayerNorm(cfg.d_model)
        self.ffn = nn.Sequential(
            nn.Linear(cfg.d_model, cfg.d_model * cfg.ffn_mult),
            nn.GELU(),
            nn.Linear(cfg.d_model * cfg.ffn_mult, cfg.d_model),
        )

    def forward(self, x, attn_mask=None, past=None):
        attn_out, new_past = self.attn(self.attn_norm(x), attn_mask=attn_mask, past=past)
        x = x + attn_out
        return x + self.ffn(self.ffn_norm(x)), new_past


class CausalDecoder(nn.Module):
    def __init__(self, cfg: DecoderConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.start_emb = nn.Parameter(torch.zeros(cfg.d_model))
        self.blocks = nn.ModuleList(DecoderBlock(cfg) for _ in range(cfg.n_layers))
        self.final_norm = nn.LayerNorm(cfg.d_model)
        self.lm_head = nn.Linear(cfg.d_model, cfg.vocab_size)
        nn.init.normal_(self.tok_emb.weight, std=0.02)
        nn.init.normal_(self.start_emb, std=0.02)

    def _positions(self, length: int, offset: int, like: torch.Tensor) -> torch.Tensor:
        table = sinusoidal_positions(offset + length, self.cfg.d_model, device=like.device, dtype=like.dtype)
        return table[offset:]

    def forward_embeddings(self, emb: torch.Tensor, lengths: torch.Tensor | None = None) -> torch.Tensor:
        """(B, L, d) embedding rows -> (B, L + 1, vocab) logits.

        ``lengths`` gives the true row count per batch element when the
        batch is right-padded; padded key slots are masked out.
        """
        bsz, L, _ = emb.shape
        start = self.start_emb.to(emb.dtype).expand(bsz, 1, -1)
        x = torch.cat([start, emb], dim=1)
        x = x + self._positions(L + 1, 0, x)

        total = L + 1
        causal = torch.tril(torch.ones(total, total, dtype=torch.bool, device=x.device))
        if lengths is None:
            mask = causal
        else:
            # valid key slots for element b are 0..lengths[b] (start + rows)
            key_ok = torch.arange(total, device=x.device)[None, :] <= lengths[:, None]
            mask = causal[None, None, :, :] & key_ok[:, None, None, :]

        for block in self.blocks:
            x, _ = block(x, attn_mask=mask)
        return self.lm_head(self.final_norm(x))

    def prefill(self, emb: torch.Tensor):
        """Run the full prefix once; returns (last-row logits, kv cache)."""
        bsz, L, _ = emb.shape
        start = self.start_emb.to(emb.dtype).expand(bsz, 1, -1)
        x = torch.cat([start, emb], dim=1)
        x = x + self._positions(L + 1, 0, x)
        past = []
        for block in self.blocks:
            x, kv = block(x)
            past.append(kv)
        logits = self.lm_head(self.final_norm(x[:, -1:]))
        return logits[:, 0], past

    def step(self, emb_row: torch.Tensor, past: list, position: int):
        """One cached decode step. emb_row: (B, 1, d); position is its index."""
        x = emb_row + self._positions(1, position + 1, emb_row)  # +1 for the start slot
        new_past = []
        for block, kv in zip(self.blocks, past):
            x, new_kv = block(x, past=kv)
            new_past.append(new_kv)
        logits = self.lm_head(self.final_norm(x))
        return logits[:, 0], new_past
