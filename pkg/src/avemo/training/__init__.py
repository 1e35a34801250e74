from avemo.training.builders import (
    Stage1Item,
    Stage2Item,
    Stage3Item,
    Stage3Round,
    build_stage3_context,
    build_stage3_example,
    precompute_features,
    stage1_materials,
    stage1_sequence,
    stage2_materials,
    stage2_sequence,
    stage3_materials,
)
from avemo.training.loss import MEAN_PER_TOKEN, SUM_PER_ROUND, masked_nll
from avemo.training.loop import STAGE_TRAINABLE, StageConfig, TrainResult, apply_stage_freezing, train_stage
from avemo.training.optim import OptimizerConfig, build_optimizer, lr_factor
from avemo.training.pretrain import PretrainConfig, PretrainSampler, harvest_bank, pretrain_lm

__all__ = [
    "MEAN_PER_TOKEN",
    "OptimizerConfig",
    "PretrainConfig",
    "STAGE_TRAINABLE",
    "SUM_PER_ROUND",
    "Stage1Item",
    "Stage2Item",
    "Stage3Item",
    "Stage3Round",
    "StageConfig",
    "TrainResult",
    "apply_stage_freezing",
    "build_optimizer",
    "build_stage3_context",
    "build_stage3_example",
    "lr_factor",
    "masked_nll",
    "precompute_features",
    "harvest_bank",
    "pretrain_lm",
    "PretrainSampler",
    "stage1_materials",
    "stage1_sequence",
    "stage2_materials",
    "stage2_sequence",
    "stage3_materials",
    "train_stage",
]
