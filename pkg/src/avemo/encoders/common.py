"""Shared encoder plumbing: positions, freezing, parameter checksums."""

from __future__ import annotations

import hashlib
import math

import torch
from torch import nn


def sinusoidal_positions(length: int, dim: int, device=None, dtype=torch.float32) -> torch.Tensor:
    """Fixed sine/cosine position table, shape (length, dim)."""
    position = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    half = (dim + 1) // 2
    div = torch.exp(torch.arange(half, dtype=torch.float64) * (-math.log(10000.0) / max(half - 1, 1)))
    table = torch.zeros(length, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(position * div)[:, : table[:, 0::2].shape[1]]
    table[:, 1::2] = torch.cos(position * div)[:, : table[:, 1::2].shape[1]]
    return table.to(device=device, dtype=dtype)


def set_trainable(module: nn.Module, flag: bool) -> None:
    """Freeze or unfreeze every parameter of a module (idempotent)."""
    for p in module.parameters():
        p.requires_grad_(flag)


def is_trainable(module: nn.Module) -> bool:
    params = list(module.parameters())
    return bool(params) and all(p.requires_grad for p in params)


def param_checksum(module: nn.Module) -> str:
    """Deterministic digest of all parameter and buffer values."""
    h = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def named_param_checksum(named_params) -> str:
    h = hashlib.sha256()
    for name, p in sorted(named_params, key=lambda kv: kv[0]):
        h.update(name.encode())
        h.update(p.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()
