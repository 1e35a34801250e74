"""Masked negative log-likelihood over target positions."""

from __future__ import annotations

import torch

from avemo.errors import EmptyTarget

MEAN_PER_TOKEN = "mean_per_token"
SUM_PER_ROUND = "sum_per_round"


def masked_nll(
    log_probs: torch.Tensor,
    targets: torch.Tensor,
    mask: torch.Tensor,
    reduction: str = MEAN_PER_TOKEN,
) -> torch.Tensor:
    """NLL summed over masked positions.

    Accepts (L, vocab) or batched (B, L, vocab) rows. ``mean_per_token``
    divides by the pooled masked count; ``sum_per_round`` keeps the raw
    per-sequence sums (matching a sum-over-rounds objective) averaged
    over the batch. Positions outside the mask never contribute, no
    matter what their targets say.
    """
    if reduction not in (MEAN_PER_TOKEN, SUM_PER_ROUND):
        raise ValueError(f"unknown reduction {reduction!r}")
    if log_probs.ndim == 2:
        log_probs = log_probs.unsqueeze(0)
        targets = targets.unsqueeze(0)
        mask = mask.unsqueeze(0)
    count = int(mask.sum().item())
    if count == 0:
        raise EmptyTarget("loss mask selects no position")
    token_nll = -log_probs.gather(-1, targets.clamp(min=0).unsqueeze(-1)).squeeze(-1)
    masked = token_nll * mask
    if reduction == MEAN_PER_TOKEN:
        return masked.sum() / count
    return masked.sum(dim=-1).mean()
