"""Encoder-quality probes for the objective ablations.

Both probes regenerate from the understanding prompts and extract the
predicted label from the text. A model trained without the emotion
objective simply never emits the label clause, which is exactly the
behavior the ablation is meant to expose.
"""

from __future__ import annotations

import re

import torch

from avemo.core.manifest import DatasetManifest
from avemo.core.vocab import EmotionVocabulary
from avemo.lm.model import DecodeConfig
from avemo.training.builders import stage1_materials, stage1_sequence, stage2_materials, stage2_sequence

_EMOTION_CLAUSE = re.compile(r"emotion:\s*([a-z]+)")


def extract_stage1_label(text: str, vocab: EmotionVocabulary) -> str | None:
    match = _EMOTION_CLAUSE.search(text.lower())
    if match and match.group(1) in vocab:
        return match.group(1)
    return None


def extract_stage2_label(text: str, vocab: EmotionVocabulary) -> str | None:
    head = text.strip().lower()
    lead = re.match(r"([a-z]+)", head)
    if lead and lead.group(1) in vocab:
        return lead.group(1)
    for label in vocab.labels:
        if re.search(rf"\b{label}\b", head):
            return label
    return None


@torch.no_grad()
def stage1_emotion_accuracy(
    system, manifest: DatasetManifest, vocab: EmotionVocabulary, max_new: int = 96
) -> float:
    """Fraction of user turns whose emotion the speech path names correctly.

    Probes with the transcript+emotion prompt regardless of how the
    encoder was trained, so an ASR-only encoder is measured on the same
    question as an ASR+SER one.
    """
    system.eval()
    items = stage1_materials(manifest, "asr+ser", system.tokenizer, system.cfg.mel)
    if not items:
        return 0.0
    hits = 0
    for item in items:
        seq = stage1_sequence(system, item, include_target=False)
        ids = system.model.generate(seq, DecodeConfig(), max_new)
        predicted = extract_stage1_label(system.tokenizer.decode(ids), vocab)
        hits += int(predicted == item.emotion)
    return hits / len(items)


@torch.no_grad()
def stage2_emotion_accuracy(
    system, manifest: DatasetManifest, vocab: EmotionVocabulary, max_new: int = 32
) -> float:
    """Fraction of user turns whose emotion the face path names correctly."""
    system.eval()
    items = stage2_materials(manifest, "emr", system.tokenizer, system.cfg.video)
    if not items:
        return 0.0
    hits = 0
    for item in items:
        seq = stage2_sequence(system, item, include_target=False)
        ids = system.model.generate(seq, DecodeConfig(), max_new)
        predicted = extract_stage2_label(system.tokenizer.decode(ids), vocab)
        hits += int(predicted == item.emotion)
    return hits / len(items)
