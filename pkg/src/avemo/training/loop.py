"""The three-stage curriculum driver.

Each stage declares exactly which parameter groups may move; everything
else is frozen and its checksum is re-verified during and after
training, so a leaky optimizer surfaces as
:class:`FrozenGroupViolation` rather than silent drift.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch

from avemo.core.manifest import DatasetManifest
from avemo.errors import MissingField, NonFiniteLoss, FrozenGroupViolation
from avemo.system import GROUPS, DialogueSystem, save_checkpoint
from avemo.training.builders import (
    DEFAULT_MODALITIES,
    build_stage3_example,
    precompute_features,
    stage1_materials,
    stage1_sequence,
    stage2_materials,
    stage2_sequence,
    stage3_materials,
)
from avemo.training.loss import MEAN_PER_TOKEN, SUM_PER_ROUND, masked_nll
from avemo.training.optim import OptimizerConfig, build_optimizer
from avemo.core.vocab import EmotionVocabulary

log = logging.getLogger(__name__)

STAGE_TRAINABLE = {
    1: ("speech_encoder", "projection.audio"),
    2: ("face_encoder.frame", "face_encoder.temporal", "face_encoder.queries", "projection.visual"),
    3: ("decoder.lora", "decoder.bias_norm"),
}

STAGE_OBJECTIVES = {
    1: ("asr", "ser"),
    2: ("emr", "emd"),
    3: ("dialogue",),
}


@dataclass(frozen=True)
class StageConfig:
    stage: int
    objectives: tuple[str, ...] = ()
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    batch_size: int = 32
    max_steps: int = 300
    eval_every: int = 50
    loss_reduction: str = MEAN_PER_TOKEN
    modalities: tuple[str, ...] = DEFAULT_MODALITIES
    seed: int = 0
    full_metadata_targets: bool = False
    augment_noise: float = 0.0  # train-time feature noise (stages 1 and 2)

    def __post_init__(self):
        if self.stage not in (1, 2, 3):
            raise ValueError(f"stage must be 1, 2, or 3, got {self.stage}")
        allowed = set(STAGE_OBJECTIVES[self.stage])
        objectives = tuple(self.objectives) or STAGE_OBJECTIVES[self.stage]
        unknown = set(objectives) - allowed
        if unknown:
            raise ValueError(f"objectives {sorted(unknown)} not valid for stage {self.stage}")
        object.__setattr__(self, "objectives", objectives)
        if self.loss_reduction not in (MEAN_PER_TOKEN, SUM_PER_ROUND):
            raise ValueError(f"unknown loss reduction {self.loss_reduction!r}")

    @property
    def task(self) -> str:
        if self.stage == 1:
            return "asr+ser" if "ser" in self.objectives else "asr"
        if self.stage == 2:
            return "emr+emd" if "emd" in self.objectives else "emr"
        return "dialogue"


@dataclass
class TrainResult:
    losses: list[float]
    final_loss: float
    steps: int
    log_path: Path | None = None
    checkpoint_path: Path | None = None


class MetricsLog:
    """Append-only JSONL training log: step, loss, lr, grad norm."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def write(self, step: int, loss: float, lr: float, grad_norm: float):
        if self.path:
            with open(self.path, "a") as fh:
                fh.write(json.dumps({"step": step, "loss": loss, "lr": lr, "grad_norm": grad_norm}) + "\n")


def apply_stage_freezing(system: DialogueSystem, stage: int) -> tuple[str, ...]:
    """Freeze everything, then unfreeze the stage's trainable groups."""
    if stage == 3:
        system.ensure_adapters()
    for p in system.parameters():
        p.requires_grad_(False)
    for group in STAGE_TRAINABLE[stage]:
        for _, p in system.group_parameters(group):
            p.requires_grad_(True)
    return tuple(g for g in GROUPS if g not in STAGE_TRAINABLE[stage])


def _check_required_tags(manifest: DatasetManifest, cfg: StageConfig):
    present = {tag for rec in manifest.records for tag in rec.task_tags}
    needed = {"asr"} if cfg.stage == 1 else {"emr"} if cfg.stage == 2 else {"dialogue"}
    if not needed & present:
        raise MissingField(
            f"stage {cfg.stage} needs records tagged {sorted(needed)}; manifest has {sorted(present)}"
        )


def _grad_norm(params) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(p.grad.detach().norm() ** 2)
    return math.sqrt(total)


def train_stage(
    system: DialogueSystem,
    cfg: StageConfig,
    manifest: DatasetManifest,
    vocab: EmotionVocabulary | None = None,
    out_dir: str | Path | None = None,
    log_path: str | Path | None = None,
) -> TrainResult:
    """Run one stage; returns the loss history and writes an optional checkpoint."""
    vocab = vocab or EmotionVocabulary()
    _check_required_tags(manifest, cfg)
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)

    if cfg.stage == 1:
        items = stage1_materials(
            manifest, cfg.task, system.tokenizer, system.cfg.mel, cfg.full_metadata_targets
        )
        make_batch = lambda batch: [
            stage1_sequence(system, it, augment_noise=cfg.augment_noise) for it in batch
        ]
    elif cfg.stage == 2:
        items = stage2_materials(manifest, cfg.task, system.tokenizer, system.cfg.video)
        make_batch = lambda batch: [
            stage2_sequence(system, it, augment_noise=cfg.augment_noise) for it in batch
        ]
    else:
        materials = stage3_materials(
            manifest, system.tokenizer, vocab, cfg.modalities, system.cfg.mel, system.cfg.video
        )
        precompute_features(system, materials)
        items = [build_stage3_example(system, item, cfg.modalities) for item in materials]
        make_batch = lambda batch: list(batch)
    if not items:
        raise MissingField(f"stage {cfg.stage}: no usable records in manifest")

    frozen_groups = apply_stage_freezing(system, cfg.stage)
    frozen_before = {g: system.group_checksum(g) for g in frozen_groups}

    def verify_frozen(step):
        for group in frozen_groups:
            if system.group_checksum(group) != frozen_before[group]:
                raise FrozenGroupViolation(f"frozen group {group!r} changed at step {step}")

    trainable = [
        (n, p)
        for g in STAGE_TRAINABLE[cfg.stage]
        for n, p in system.group_parameters(g)
        if p.requires_grad
    ]
    optimizer, scheduler = build_optimizer(trainable, cfg.optimizer, cfg.max_steps)
    metrics = MetricsLog(log_path)

    system.train()
    losses: list[float] = []
    order: list[int] = []
    for step in range(cfg.max_steps):
        if len(order) < cfg.batch_size:
            refill = list(range(len(items)))
            rng.shuffle(refill)
            order.extend(refill)
        batch = [items[i] for i in order[: cfg.batch_size]]
        del order[: cfg.batch_size]

        seqs = make_batch(batch)
        log_probs, targets, mask = system.model.score_batch(seqs)
        loss = masked_nll(log_probs, targets, mask, cfg.loss_reduction)
        if not torch.isfinite(loss):
            raise NonFiniteLoss(f"loss became {loss.item()} at step {step}")

        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_([p for _, p in trainable], 1.0)
        grad_norm = _grad_norm(p for _, p in trainable)
        optimizer.step()
        lr = scheduler.get_last_lr()[0]
        scheduler.step()

        losses.append(float(loss.item()))
        metrics.write(step, losses[-1], lr, grad_norm)
        if cfg.eval_every and (step + 1) % cfg.eval_every == 0:
            verify_frozen(step)
            log.info("stage %d step %d loss %.4f", cfg.stage, step, losses[-1])

    verify_frozen(cfg.max_steps)
    system.eval()

    checkpoint_path = None
    if out_dir is not None:
        provenance = {
            "stage": cfg.stage,
            "objectives": list(cfg.objectives),
            "modalities": list(cfg.modalities),
            "steps": cfg.max_steps,
            "final_loss": losses[-1],
            "seed": cfg.seed,
        }
        checkpoint_path = save_checkpoint(system, out_dir, provenance)

    return TrainResult(
        losses=losses,
        final_loss=losses[-1],
        steps=cfg.max_steps,
        log_path=Path(log_path) if log_path else None,
        checkpoint_path=checkpoint_path,
    )
