"""Language-model warm-up for the builtin decoder.

The staged curriculum assumes a decoder that already models text and
knows how to read the content of a marker-delimited span (the
full-scale setup gets both from a pretrained chat model). This step
trains the builtin decoder as a next-token LM on sequences whose span
CONTENT determines the answer: the span holds the text the answer must
restate, freshly recombined from corpus pieces every step so nothing
can be memorized by position or length. Stage 1 and 2 then only have to
align encoder features into that already-readable span space, which is
exactly their job.

Encoders and projections are untouched here.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

import torch

from avemo.core.manifest import DatasetManifest
from avemo.core.records import split_rounds
from avemo.core.vocab import EmotionVocabulary
from avemo.errors import MissingField, NonFiniteLoss
from avemo.lm.sequence import MixedSequence, TextSegment
from avemo.prompts import build_stage1_prompt, build_stage2_prompt, build_stage3_prompt, format_ai_target, turn_marker
from avemo.system import DialogueSystem, save_checkpoint
from avemo.training.builders import emotion_clause
from avemo.training.loss import masked_nll
from avemo.training.loop import MetricsLog
from avemo.training.optim import OptimizerConfig, build_optimizer


@dataclass(frozen=True)
class PretrainConfig:
    max_steps: int = 600
    batch_size: int = 16
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(peak_lr=3e-3, warmup_steps=20))
    seed: int = 0


@dataclass
class CorpusBank:
    """Reusable text pieces harvested from a manifest."""

    transcripts: list[str]
    emotions: list[str]
    intensities: list[str]
    descriptions: dict[str, str]
    replies: dict[str, tuple[str, str]]  # user emotion -> (ai emotion, ai text)
    metadata_texts: list[str]


def harvest_bank(manifest: DatasetManifest, vocab: EmotionVocabulary) -> CorpusBank:
    from avemo.prompts import render_metadata

    transcripts, emotions, intensities, metadata_texts = [], [], [], []
    descriptions: dict[str, str] = {}
    replies: dict[str, tuple[str, str]] = {}
    for rec in manifest.records:
        for turn in rec.user_turns():
            if turn.transcript and turn.transcript not in transcripts:
                transcripts.append(turn.transcript)
            if turn.emotion not in emotions:
                emotions.append(turn.emotion)
            intensity = turn.metadata.emotion_intensity
            if intensity and intensity not in intensities:
                intensities.append(intensity)
            if turn.facial_description:
                descriptions.setdefault(turn.emotion, turn.facial_description)
            md = render_metadata(turn.metadata, include_emotion=False)
            if md and md not in metadata_texts:
                metadata_texts.append(md)
        if rec.kind == "dialogue":
            for _, user, ai in split_rounds(rec.dialogue):
                replies.setdefault(user.emotion, (ai.emotion, ai.transcript))
    if not transcripts or not emotions:
        raise MissingField("manifest has no usable user turns for LM pretraining")
    return CorpusBank(transcripts, emotions, intensities or ["unspecified"], descriptions, replies, metadata_texts)


class PretrainSampler:
    """Draws one training token sequence per call.

    Three shapes, mirroring the three stages: speech understanding
    (audio span -> transcript + emotion clause), face video
    understanding (video span -> label + description), and short
    dialogues (per-round spans -> tagged assistant reply). Span content
    is recombined at random every draw.
    """

    def __init__(self, system: DialogueSystem, bank: CorpusBank, vocab: EmotionVocabulary):
        self.tokenizer = system.tokenizer
        self.bank = bank
        self.vocab = vocab
        self.audio_first = system.cfg.audio_first
        tok = self.tokenizer
        self.prompt1 = {t: tok.encode(build_stage1_prompt(t).system_text + "\n") for t in ("asr", "asr+ser")}
        self.prompt2 = {t: tok.encode(build_stage2_prompt(t).system_text + "\n") for t in ("emr", "emr+emd")}
        self.prompt3 = tok.encode(build_stage3_prompt().system_text + "\n")
        self.user_marker = tok.encode(f"\n{turn_marker('user')} ")
        self.ai_marker = tok.encode(f"\n{turn_marker('ai')} ")

    def _span(self, kind: str, content: str, rng: random.Random | None = None) -> list[int]:
        """Marker-delimited span holding (possibly compressed) content bytes.

        Encoder feature spans are shorter than the text they must yield
        (the speech path halves the time axis), so the reconstruction
        skill is trained at mixed compression ratios instead of verbatim
        length only.
        """
        tok = self.tokenizer
        name = "audio" if kind == "audio" else "video"
        body = tok.encode(content)
        if rng is not None:
            roll = rng.random()
            if roll < 0.3:
                body = body[::2]
            elif roll < 0.5:
                body = body[::3]
        return [tok.token(f"{name}_begin"), *body, tok.token(f"{name}_end")]

    def _clause(self, rng: random.Random) -> tuple[str, str, str]:
        emotion = rng.choice(self.bank.emotions)
        intensity = rng.choice(self.bank.intensities)
        clause = f"emotion: {emotion} (intensity: {intensity})"
        return emotion, intensity, clause

    def _stage1(self, rng: random.Random) -> list[int]:
        tok = self.tokenizer
        transcript = rng.choice(self.bank.transcripts)
        _, _, clause = self._clause(rng)
        task = rng.choice(("asr", "asr+ser"))
        content = transcript if task == "asr" else f"{transcript}\n{clause}"
        return [
            *self.prompt1[task],
            *self._span("audio", content, rng),
            *tok.encode(content),
            tok.token("eos"),
        ]

    def _stage2(self, rng: random.Random) -> list[int]:
        # the span carries only the label: the visual feature is a short
        # fixed-length query summary, and descriptions are label-keyed
        tok = self.tokenizer
        emotion = rng.choice(self.bank.emotions)
        description = self.bank.descriptions.get(emotion, "")
        task = rng.choice(("emr", "emr+emd")) if description else "emr"
        answer = emotion if task == "emr" else f"{emotion}. {description}"
        return [
            *self.prompt2[task],
            *self._span("video", emotion),
            *tok.encode(answer),
            tok.token("eos"),
        ]

    def _dialogue(self, rng: random.Random) -> list[int]:
        tok = self.tokenizer
        tokens = list(self.prompt3)
        for _ in range(rng.randint(1, 2)):
            emotion, _, clause = self._clause(rng)
            transcript = rng.choice(self.bank.transcripts)
            ai_emotion, ai_text = self.bank.replies.get(emotion, (emotion, f"i hear you feel {emotion}."))
            tokens.extend(self.user_marker)
            if self.bank.metadata_texts and rng.random() < 0.7:
                tokens.extend(tok.encode(f"[{rng.choice(self.bank.metadata_texts)}]\n"))
            spans = [
                self._span("audio", f"{transcript}\n{clause}", rng),
                self._span("video", emotion),
            ]
            if not self.audio_first:
                spans.reverse()
            for span in spans:
                tokens.extend(span)
            tokens.extend(self.ai_marker)
            tokens.extend(format_ai_target(tok, ai_emotion, ai_text, self.vocab))
        return tokens

    def sample(self, rng: random.Random) -> list[int]:
        roll = rng.random()
        if roll < 0.35:
            return self._stage1(rng)
        if roll < 0.7:
            return self._stage2(rng)
        return self._dialogue(rng)

    def sample_batch(self, rng: random.Random, size: int) -> list[list[int]]:
        """One kind per batch: keeps lengths similar, so little padding waste."""
        roll = rng.random()
        if roll < 0.35:
            draw = self._stage1
        elif roll < 0.7:
            draw = self._stage2
        else:
            draw = self._dialogue
        return [draw(rng) for _ in range(size)]


def pretrain_lm(
    system: DialogueSystem,
    manifest: DatasetManifest,
    cfg: PretrainConfig | None = None,
    vocab: EmotionVocabulary | None = None,
    out_dir: str | Path | None = None,
    log_path: str | Path | None = None,
):
    """Train the decoder (only) as a next-token LM; returns the loss history."""
    cfg = cfg or PretrainConfig()
    vocab = vocab or EmotionVocabulary()
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    sampler = PretrainSampler(system, harvest_bank(manifest, vocab), vocab)

    for p in system.parameters():
        p.requires_grad_(False)
    trainable = [(f"decoder.{n}", p) for n, p in system.model.decoder.named_parameters()]
    for _, p in trainable:
        p.requires_grad_(True)
    optimizer, scheduler = build_optimizer(trainable, cfg.optimizer, cfg.max_steps)
    metrics = MetricsLog(log_path)

    context_len = system.cfg.decoder.context_len
    pad = system.tokenizer.token("pad")

    system.train()
    losses = []
    for step in range(cfg.max_steps):
        batch = [
            MixedSequence(
                (TextSegment(tuple(tokens), is_target=True),), context_len=context_len, pad_id=pad
            )
            for tokens in sampler.sample_batch(rng, cfg.batch_size)
        ]
        log_probs, targets, mask = system.model.score_batch(batch)
        loss = masked_nll(log_probs, targets, mask)
        if not torch.isfinite(loss):
            raise NonFiniteLoss(f"pretraining loss became {loss.item()} at step {step}")
        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_([p for _, p in trainable], 1.0)
        optimizer.step()
        lr = scheduler.get_last_lr()[0]
        scheduler.step()
        losses.append(float(loss.item()))
        metrics.write(step, losses[-1], lr, 0.0)
    system.eval()

    if out_dir is not None:
        save_checkpoint(system, out_dir, {"stage": 0, "kind": "lm_pretrain", "steps": cfg.max_steps})
    return losses
