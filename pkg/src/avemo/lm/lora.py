"""Low-rank adapters: functional ops and decoder attachment.

An adapter contributes ``(alpha / rank) * B @ A @ x`` on top of a frozen
base projection; ``B`` starts at zero so a fresh adapter is an exact
no-op. Adapters live in separate parameters (``lora_a`` / ``lora_b``)
so checkpoints store them apart from base weights and detaching
restores the original modules bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn
from torch.nn import functional as F

from avemo.errors import DoubleMerge, ShapeMismatch

DEFAULT_TARGET_PROJECTIONS = ("q_proj", "k_proj", "v_proj", "o_proj")


@dataclass
class LoraAdapter:
    rank: int
    alpha: float
    a: torch.Tensor  # (rank, d_in)
    b: torch.Tensor  # (d_out, rank)
    merged: bool = False

    def __post_init__(self):
        if self.rank < 1:
            raise ShapeMismatch(f"rank must be >= 1, got {self.rank}")
        if self.a.shape[0] != self.rank or self.b.shape[1] != self.rank:
            raise ShapeMismatch(
                f"adapter shapes {tuple(self.a.shape)} / {tuple(self.b.shape)} disagree with rank {self.rank}"
            )

    @property
    def scaling(self) -> float:
        return self.alpha / self.rank

    @classmethod
    def create(cls, d_in: int, d_out: int, rank: int = 16, alpha: float | None = None, generator=None):
        if rank < 1:
            raise ShapeMismatch(f"rank must be >= 1, got {rank}")
        a = torch.randn(rank, d_in, generator=generator) / math.sqrt(d_in)
        b = torch.zeros(d_out, rank)
        return cls(rank=rank, alpha=float(alpha if alpha is not None else rank), a=a, b=b)


def lora_apply(x: torch.Tensor, w: torch.Tensor, adapter: LoraAdapter) -> torch.Tensor:
    """``W x + (alpha/rank) * B (A x)`` for x shaped (..., d_in)."""
    if w.shape[1] != x.shape[-1] or adapter.a.shape[1] != w.shape[1] or adapter.b.shape[0] != w.shape[0]:
        raise ShapeMismatch(
            f"x {tuple(x.shape)}, W {tuple(w.shape)}, A {tuple(adapter.a.shape)}, B {tuple(adapter.b.shape)}"
        )
    base = x @ w.t()
    delta = (x @ adapter.a.t()) @ adapter.b.t()
    return base + adapter.scaling * delta


def lora_merge(w: torch.Tensor, adapter: LoraAdapter) -> torch.Tensor:
    """Fold the adapter into the base matrix: ``W + (alpha/rank) * B A``.

    Marks the adapter merged; merging the same adapter again without a
    reset raises :class:`DoubleMerge`.
    """
    if adapter.merged:
        raise DoubleMerge("adapter already merged into a base matrix")
    if adapter.a.shape[1] != w.shape[1] or adapter.b.shape[0] != w.shape[0]:
        raise ShapeMismatch(f"W {tuple(w.shape)} vs A {tuple(adapter.a.shape)}, B {tuple(adapter.b.shape)}")
    merged = w + adapter.scaling * (adapter.b @ adapter.a)
    adapter.merged = True
    return merged


@dataclass(frozen=True)
class LoraConfig:
    rank: int = 16
    alpha: float = 16.0
    target_projections: tuple[str, ...] = DEFAULT_TARGET_PROJECTIONS
    train_bias_and_norm: bool = True


class LoRALinear(nn.Module):
    """Wraps a base Linear; adds the low-rank path on top."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float, generator=None):
        super().__init__()
        if rank < 1:
            raise ShapeMismatch(f"rank must be >= 1, got {rank}")
        self.base = base
        self.rank = rank
        self.alpha = float(alpha)
        self.lora_a = nn.Parameter(
            torch.randn(rank, base.in_features, generator=generator) / math.sqrt(base.in_features)
        )
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))

    @property
    def scaling(self) -> float:
        return self.alpha / self.rank

    def forward(self, x):
        return self.base(x) + self.scaling * F.linear(F.linear(x, self.lora_a), self.lora_b)


def _iter_attention_parents(decoder: nn.Module):
    for module in decoder.modules():
        if hasattr(module, "q_proj"):
            yield module


def attach_lora(decoder: nn.Module, cfg: LoraConfig, generator=None) -> list[str]:
    """Wrap every targeted projection; returns the wrapped module paths."""
    wrapped = []
    for parent in _iter_attention_parents(decoder):
        for name in cfg.target_projections:
            child = getattr(parent, name, None)
            if isinstance(child, LoRALinear):
                raise ShapeMismatch(f"{name} already has an adapter attached")
            if isinstance(child, nn.Linear):
                setattr(parent, name, LoRALinear(child, cfg.rank, cfg.alpha, generator=generator))
                wrapped.append(name)
    if not wrapped:
        raise ShapeMismatch("no target projections found to adapt")
    return wrapped


def detach_lora(decoder: nn.Module) -> int:
    """Restore the original Linear modules; returns how many were detached."""
    count = 0
    for parent in _iter_attention_parents(decoder):
        for name, child in list(vars(parent)["_modules"].items()):
            if isinstance(child, LoRALinear):
                setattr(parent, name, child.base)
                count += 1
    return count


def merge_lora(decoder: nn.Module) -> int:
    """Fold all adapters into their base weights, then detach them."""
    count = 0
    for parent in _iter_attention_parents(decoder):
        for name, child in list(vars(parent)["_modules"].items()):
            if isinstance(child, LoRALinear):
                with torch.no_grad():
                    child.base.weight += child.scaling * (child.lora_b @ child.lora_a)
                setattr(parent, name, child.base)
                count += 1
    return count


def lora_parameters(decoder: nn.Module):
    for name, param in decoder.named_parameters():
        if "lora_a" in name or "lora_b" in name:
            yield name, param


def bias_and_norm_parameters(decoder: nn.Module):
    """All bias vectors plus LayerNorm scales outside adapter modules."""
    norm_weight_names = {
        f"{mod_name}.weight"
        for mod_name, mod in decoder.named_modules()
        if isinstance(mod, nn.LayerNorm)
    }
    for name, param in decoder.named_parameters():
        if "lora_" in name:
            continue
        if name.endswith(".bias") or name in norm_weight_names:
            yield name, param
