"""AdamW with linear warm-up into cosine decay.

The ramp rule is pinned: at step ``s < warmup_steps`` the factor is
``(s + 1) / warmup_steps``, so step 0 runs at ``peak_lr / warmup`` and
step ``warmup_steps`` runs exactly at ``peak_lr``. From there the
factor decays along a half cosine to ``floor_ratio`` at ``max_steps``
and is monotone non-increasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class OptimizerConfig:
    peak_lr: float = 3e-3
    weight_decay: float = 0.01
    warmup_steps: int = 20
    floor_ratio: float = 0.0

    def __post_init__(self):
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if not 0.0 <= self.floor_ratio <= 1.0:
            raise ValueError("floor_ratio must be in [0, 1]")


def lr_factor(step: int, warmup_steps: int, max_steps: int, floor_ratio: float = 0.0) -> float:
    if warmup_steps > 0 and step < warmup_steps:
        return (step + 1) / warmup_steps
    if max_steps <= warmup_steps:
        return 1.0
    progress = min((step - warmup_steps) / (max_steps - warmup_steps), 1.0)
    cosine = 0.5 * (1.0 + math.cos(math.pi * progress))
    return floor_ratio + (1.0 - floor_ratio) * cosine


def build_optimizer(named_params, cfg: OptimizerConfig, max_steps: int):
    """AdamW over the given (name, param) pairs plus its LR scheduler.

    Weight decay applies only to matrices; biases, norms, and adapter
    vectors are excluded, per the usual decoupled-decay convention.
    """
    decay, no_decay = [], []
    for name, p in named_params:
        if not p.requires_grad:
            continue
        if p.ndim <= 1 or name.endswith(".bias"):
            no_decay.append(p)
        else:
            decay.append(p)
    optimizer = torch.optim.AdamW(
        [
            {"params": decay, "weight_decay": cfg.weight_decay},
            {"params": no_decay, "weight_decay": 0.0},
        ],
        lr=cfg.peak_lr,
    )
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: lr_factor(step, cfg.warmup_steps, max_steps, cfg.floor_ratio)
    )
    return optimizer, scheduler
