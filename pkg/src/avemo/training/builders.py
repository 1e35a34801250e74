"""Stage-specific example builders.

Stage 1 pairs a speech prompt and an audio span with transcript and/or
emotion targets; stage 2 pairs a face-video prompt and a visual span
with label and/or description targets; stage 3 lays out whole dialogues
round by round, masking every assistant span. The same round layout
builds generation contexts (history plus the current user turn up to
the assistant marker), so training and inference see identical token
streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import torch

from avemo.core.manifest import DatasetManifest
from avemo.core.records import USER, SpeakerMetadata, UtteranceRecord, split_rounds
from avemo.core.vocab import EmotionVocabulary
from avemo.errors import ContextOverflow, MissingField
from avemo.lm.sequence import AUDIO, VISUAL, MixedSequence, TextSegment, assemble_input, feature_span
from avemo.preprocessing.audio import MelConfig, compute_log_mel, read_wav
from avemo.preprocessing.video import VideoConfig, crop_sequence, load_frames
from avemo.prompts import (
    build_stage1_prompt,
    build_stage2_prompt,
    build_stage3_prompt,
    format_ai_target,
    render_metadata,
    turn_marker,
)

TEXT = "text"
DEFAULT_MODALITIES = (AUDIO, "video")


def _load_mel(manifest: DatasetManifest, rec: UtteranceRecord, mel_cfg: MelConfig) -> torch.Tensor:
    waveform, sr = read_wav(manifest.resolve(rec.audio_ref))
    return torch.from_numpy(compute_log_mel(waveform, sr, mel_cfg))


def _load_crops(manifest: DatasetManifest, rec: UtteranceRecord, video_cfg: VideoConfig) -> torch.Tensor:
    frames, fps = load_frames(manifest.resolve(rec.video_ref))
    seq, _ = crop_sequence(frames, fps, cfg=video_cfg)
    return torch.from_numpy(seq.crops)


def emotion_clause(rec: UtteranceRecord, full_metadata: bool = False) -> str:
    """The SER/EMR answer text: emotion plus intensity, or full metadata."""
    if full_metadata and not rec.metadata.is_empty():
        merged = replace(rec.metadata, emotion=rec.metadata.emotion or rec.emotion)
        return render_metadata(merged)
    return render_metadata(
        SpeakerMetadata(emotion=rec.emotion, emotion_intensity=rec.metadata.emotion_intensity)
    )


# -- stage 1 -------------------------------------------------------------------

@dataclass
class Stage1Item:
    mel: torch.Tensor
    prompt_text: str
    target: tuple[int, ...]
    emotion: str
    transcript: str


def stage1_target(tokenizer, rec: UtteranceRecord, task: str, full_metadata: bool = False) -> tuple[int, ...]:
    if task not in ("asr", "ser", "asr+ser"):
        raise ValueError(f"unknown stage-1 task {task!r}")
    if task in ("ser", "asr+ser") and not rec.emotion:
        raise MissingField("ser objective requires an emotion label")
    if task == "asr":
        text = rec.transcript
    elif task == "ser":
        text = emotion_clause(rec, full_metadata)
    else:
        text = f"{rec.transcript}\n{emotion_clause(rec, full_metadata)}"
    return (*tokenizer.encode(text), tokenizer.token("eos"))


def stage1_materials(
    manifest: DatasetManifest,
    task: str,
    tokenizer,
    mel_cfg: MelConfig | None = None,
    full_metadata: bool = False,
) -> list[Stage1Item]:
    """One item per asr/ser-tagged user turn.

    With ``task='asr+ser'``, records carrying both tags build combined
    examples while single-tag records contribute their own objective,
    so the batch mix follows the manifest's tag proportions.
    """
    if task not in ("asr", "asr+ser"):
        raise ValueError(f"stage-1 task must be asr or asr+ser, got {task!r}")
    mel_cfg = mel_cfg or MelConfig()
    items = []
    for rec in manifest.records:
        tags = set(rec.task_tags)
        if not tags & {"asr", "ser"}:
            continue
        # dual objectives mix example forms by tag proportion: a record
        # tagged asr+ser contributes a plain transcription example and a
        # combined transcription+emotion example
        if task == "asr":
            forms = ["asr"] if "asr" in tags else []
        elif "asr" in tags and "ser" in tags:
            forms = ["asr", "asr+ser"]
        else:
            forms = ["asr"] if "asr" in tags else ["ser"]
        for turn in rec.user_turns():
            if not turn.audio_ref:
                raise MissingField("stage 1 requires audio on user turns")
            mel = _load_mel(manifest, turn, mel_cfg)
            for form in forms:
                prompt_task = "asr" if form == "asr" else "asr+ser"
                items.append(
                    Stage1Item(
                        mel=mel,
                        prompt_text=build_stage1_prompt(prompt_task).system_text,
                        target=stage1_target(tokenizer, turn, form, full_metadata),
                        emotion=turn.emotion,
                        transcript=turn.transcript,
                    )
                )
    return items


def stage1_sequence(
    system, item: Stage1Item, include_target: bool = True, augment_noise: float = 0.0
) -> MixedSequence:
    mel = item.mel
    if augment_noise > 0.0:
        mel = mel + augment_noise * torch.randn_like(mel)
    f_a = system.encode_audio(mel)
    return assemble_input(
        system.tokenizer,
        system_text=item.prompt_text + "\n",
        f_a=f_a,
        target_tokens=item.target if include_target else None,
        context_len=system.cfg.decoder.context_len,
        audio_first=system.cfg.audio_first,
    )


# -- stage 2 -------------------------------------------------------------------

@dataclass
class Stage2Item:
    crops: torch.Tensor
    prompt_text: str
    target: tuple[int, ...]
    emotion: str


def stage2_target(tokenizer, rec: UtteranceRecord, task: str) -> tuple[int, ...]:
    if task not in ("emr", "emr+emd"):
        raise ValueError(f"unknown stage-2 task {task!r}")
    if not rec.emotion:
        raise MissingField("emr objective requires an emotion label")
    if task == "emr":
        text = rec.emotion
    else:
        if not rec.facial_description:
            raise MissingField("emd objective requires a facial_description")
        text = f"{rec.emotion}. {rec.facial_description}"
    return (*tokenizer.encode(text), tokenizer.token("eos"))


def stage2_materials(
    manifest: DatasetManifest,
    task: str,
    tokenizer,
    video_cfg: VideoConfig | None = None,
) -> list[Stage2Item]:
    if task not in ("emr", "emr+emd"):
        raise ValueError(f"stage-2 task must be emr or emr+emd, got {task!r}")
    video_cfg = video_cfg or VideoConfig()
    items = []
    for rec in manifest.records:
        tags = set(rec.task_tags)
        if "emr" not in tags and "emd" not in tags:
            continue
        # like stage 1, the dual objective mixes label-only examples with
        # label+description examples instead of weighting one loss
        forms = ["emr"]
        if task == "emr+emd" and "emd" in tags:
            forms.append("emr+emd")
        for turn in rec.user_turns():
            if not turn.video_ref:
                raise MissingField("stage 2 requires video on user turns")
            crops = _load_crops(manifest, turn, video_cfg)
            for form in forms:
                items.append(
                    Stage2Item(
                        crops=crops,
                        prompt_text=build_stage2_prompt(form).system_text,
                        target=stage2_target(tokenizer, turn, form),
                        emotion=turn.emotion,
                    )
                )
    return items


def stage2_sequence(
    system, item: Stage2Item, include_target: bool = True, augment_noise: float = 0.0
) -> MixedSequence:
    crops = item.crops
    if augment_noise > 0.0:
        crops = (crops + augment_noise * torch.randn_like(crops)).clamp(0.0, 1.0)
    f_v = system.encode_video(crops)
    return assemble_input(
        system.tokenizer,
        system_text=item.prompt_text + "\n",
        f_v=f_v,
        target_tokens=item.target if include_target else None,
        context_len=system.cfg.decoder.context_len,
        audio_first=system.cfg.audio_first,
    )


# -- stage 3 -------------------------------------------------------------------

@dataclass
class Stage3Round:
    transcript: str
    metadata_text: str
    ai_emotion: str
    ai_text: str
    ai_target: tuple[int, ...]
    mel: torch.Tensor | None = None
    crops: torch.Tensor | None = None
    f_a: torch.Tensor | None = None
    f_v: torch.Tensor | None = None


@dataclass
class Stage3Item:
    dialogue_id: str
    rounds: list[Stage3Round] = field(default_factory=list)


def stage3_materials(
    manifest: DatasetManifest,
    tokenizer,
    vocab: EmotionVocabulary,
    modalities: tuple[str, ...] = DEFAULT_MODALITIES,
    mel_cfg: MelConfig | None = None,
    video_cfg: VideoConfig | None = None,
    include_user_emotion_metadata: bool = False,
) -> list[Stage3Item]:
    """Per-dialogue round materials for the requested modalities.

    The current user's emotion metadata is excluded from the prompt by
    default: inferring it from the audio-visual features is the model's
    job, and leaking it as text would hollow out the modality ablations.
    """
    mel_cfg = mel_cfg or MelConfig()
    video_cfg = video_cfg or VideoConfig()
    items = []
    for dialogue in manifest.dialogues(tag="dialogue"):
        item = Stage3Item(dialogue_id=dialogue.dialogue_id)
        for _, user, ai in split_rounds(dialogue):
            if AUDIO in modalities and not user.audio_ref:
                raise MissingField(f"{dialogue.dialogue_id}: user turn lacks audio_ref")
            if "video" in modalities and not user.video_ref:
                raise MissingField(f"{dialogue.dialogue_id}: user turn lacks video_ref")
            item.rounds.append(
                Stage3Round(
                    transcript=user.transcript,
                    metadata_text=render_metadata(user.metadata, include_emotion=include_user_emotion_metadata),
                    ai_emotion=ai.emotion,
                    ai_text=ai.transcript,
                    ai_target=format_ai_target(tokenizer, ai.emotion, ai.transcript, vocab),
                    mel=_load_mel(manifest, user, mel_cfg) if AUDIO in modalities else None,
                    crops=_load_crops(manifest, user, video_cfg) if "video" in modalities else None,
                )
            )
        items.append(item)
    return items


@torch.no_grad()
def precompute_features(system, items: list[Stage3Item]) -> None:
    """Encode every round once; valid while the encoders stay frozen."""
    was_training = system.training
    system.eval()
    for item in items:
        for rnd in item.rounds:
            if rnd.mel is not None and rnd.f_a is None:
                rnd.f_a = system.encode_audio(rnd.mel)
            if rnd.crops is not None and rnd.f_v is None:
                rnd.f_v = system.encode_video(rnd.crops)
    if was_training:
        system.train()


def _round_segments(system, rnd: Stage3Round, modalities, mask_target: bool) -> list:
    tokenizer = system.tokenizer
    segments: list = [TextSegment(tuple(tokenizer.encode(f"\n{turn_marker(USER)} ")))]
    if rnd.metadata_text:
        segments.append(TextSegment(tuple(tokenizer.encode(f"[{rnd.metadata_text}]\n"))))
    if TEXT in modalities:
        segments.append(TextSegment(tuple(tokenizer.encode(rnd.transcript))))
    spans = []
    if AUDIO in modalities:
        f_a = rnd.f_a if rnd.f_a is not None else system.encode_audio(rnd.mel)
        spans.append(feature_span(tokenizer, AUDIO, f_a))
    if "video" in modalities:
        f_v = rnd.f_v if rnd.f_v is not None else system.encode_video(rnd.crops)
        spans.append(feature_span(tokenizer, VISUAL, f_v))
    if not system.cfg.audio_first:
        spans.reverse()
    for span in spans:
        segments.extend(span)
    segments.append(TextSegment(tuple(tokenizer.encode(f"\n{turn_marker('ai')} "))))
    segments.append(TextSegment(rnd.ai_target, is_target=mask_target))
    return segments


def _assemble_rounds(system, segments_per_round: list[list], context_len: int) -> MixedSequence:
    """System prompt plus rounds, dropping oldest whole rounds to fit."""
    tokenizer = system.tokenizer
    prefix = TextSegment(tuple(tokenizer.encode(build_stage3_prompt().system_text + "\n")))
    kept = list(segments_per_round)
    while True:
        segments = [prefix]
        for chunk in kept:
            segments.extend(chunk)
        total = sum(len(s) for s in segments)
        if total <= context_len:
            return MixedSequence(tuple(segments), context_len=context_len, pad_id=tokenizer.token("pad"))
        if len(kept) <= 1:
            raise ContextOverflow(f"single round of {total} tokens exceeds context {context_len}")
        kept.pop(0)


def stage3_prefix_len(system) -> int:
    """Token cost of the dialogue system prompt shared by every context."""
    return len(system.tokenizer.encode(build_stage3_prompt().system_text + "\n"))


def build_stage3_example(
    system, item: Stage3Item, modalities: tuple[str, ...] = DEFAULT_MODALITIES
) -> MixedSequence:
    """Training sequence over all rounds; every assistant span is masked."""
    chunks = [_round_segments(system, rnd, modalities, mask_target=True) for rnd in item.rounds]
    return _assemble_rounds(system, chunks, system.cfg.decoder.context_len)


def build_stage3_context(
    system,
    history: list[Stage3Round],
    current: Stage3Round,
    modalities: tuple[str, ...] = DEFAULT_MODALITIES,
    reserve: int = 256,
) -> MixedSequence:
    """Generation prefix: history rounds, then the current user turn up to
    the assistant marker. Oldest rounds drop until the prefix plus the
    generation reserve fit the context."""
    tokenizer = system.tokenizer
    context_len = system.cfg.decoder.context_len
    chunks = [_round_segments(system, rnd, modalities, mask_target=False) for rnd in history]

    current_segments = _round_segments(system, current, modalities, mask_target=False)
    current_segments = current_segments[:-1]  # strip the target span
    chunks.append(current_segments)
    seq = _assemble_rounds(system, chunks, max(context_len - reserve, 1))
    # reopen the full context for generation itself
    return MixedSequence(seq.segments, context_len=context_len, pad_id=tokenizer.token("pad"))
