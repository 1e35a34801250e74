"""Stage prompts, metadata rendering, and the emotion-tagged reply grammar.

The prompt wording lives in a versioned plain-text asset; its hash is
recorded in every checkpoint so a checkpoint knows which prompt set it
was trained with. Assistant replies are serialized as

    emo_begin <label> emo_end <response text> eos

using reserved tokenizer ids for the markers, which makes the grammar
lossless for arbitrary response text.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources

from avemo.core.records import SpeakerMetadata
from avemo.core.vocab import EmotionVocabulary
from avemo.errors import ParseError, UnknownEmotion
from avemo.lm.tokenizer import ByteTokenizer

PROMPT_SET_FILE = "prompts_v1.txt"

STAGE_SPEECH = "speech_understanding"
STAGE_FACE = "face_video_understanding"
STAGE_DIALOGUE = "audio_visual_dialogue"

_METADATA_ORDER = ("emotion", "emotion_description", "gender", "age", "ethnicity")


def _load_asset() -> tuple[dict[str, str], str]:
    raw = resources.files("avemo.assets").joinpath(PROMPT_SET_FILE).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    sections: dict[str, str] = {}
    current: str | None = None
    for line in raw.decode("utf-8").splitlines():
        if line.startswith("#"):
            continue
        if line.startswith("[") and line.rstrip().endswith("]"):
            current = line.strip()[1:-1]
            sections[current] = ""
        elif current is not None:
            sections[current] = (sections[current] + "\n" + line).strip() if sections[current] else line
    return sections, digest


_SECTIONS, PROMPT_SET_HASH = _load_asset()


def prompt_section(name: str) -> str:
    return _SECTIONS[name]


@dataclass(frozen=True)
class PromptTemplate:
    stage: str
    task: str
    system_text: str


def render_metadata(md: SpeakerMetadata, include_emotion: bool = True) -> str:
    """Short clauses for the present fields, fixed order, '; '-joined.

    Emotion intensity folds into the emotion clause when both are
    present. Empty metadata renders to the empty string.
    """
    clauses = []
    for name in _METADATA_ORDER:
        if name == "emotion":
            if not include_emotion:
                continue
            if md.emotion is not None:
                clause = f"emotion: {md.emotion}"
                if md.emotion_intensity is not None:
                    clause += f" (intensity: {md.emotion_intensity})"
                clauses.append(clause)
            elif md.emotion_intensity is not None:
                clauses.append(f"intensity: {md.emotion_intensity}")
            continue
        if name == "emotion_description":
            if include_emotion and md.emotion_description is not None:
                clauses.append(f"description: {md.emotion_description}")
            continue
        value = getattr(md, name)
        if value is not None:
            clauses.append(f"{name}: {value}")
    return "; ".join(clauses)


def build_stage1_prompt(task: str = "asr+ser") -> PromptTemplate:
    if task not in ("asr", "asr+ser"):
        raise ValueError(f"stage-1 task must be asr or asr+ser, got {task!r}")
    return PromptTemplate(STAGE_SPEECH, task, prompt_section(f"{STAGE_SPEECH}.{task}"))


def build_stage2_prompt(task: str = "emr+emd") -> PromptTemplate:
    if task not in ("emr", "emr+emd"):
        raise ValueError(f"stage-2 task must be emr or emr+emd, got {task!r}")
    return PromptTemplate(STAGE_FACE, task, prompt_section(f"{STAGE_FACE}.{task}"))


def build_stage3_prompt() -> PromptTemplate:
    return PromptTemplate(STAGE_DIALOGUE, "dialogue", prompt_section(STAGE_DIALOGUE))


def turn_marker(speaker: str) -> str:
    return prompt_section(f"turn.{speaker}")


def format_ai_target(
    tokenizer: ByteTokenizer, emotion: str, text: str, vocab: EmotionVocabulary
) -> tuple[int, ...]:
    """Token ids for one assistant reply in the tagged grammar."""
    vocab.require(emotion)
    if not text:
        raise ValueError("response text must be non-empty")
    return (
        tokenizer.token("emo_begin"),
        *tokenizer.encode(emotion),
        tokenizer.token("emo_end"),
        *tokenizer.encode(text),
        tokenizer.token("eos"),
    )


@dataclass(frozen=True)
class ParsedReply:
    emotion: str
    text: str
    warning: bool = False


def parse_ai_output(
    tokenizer: ByteTokenizer,
    token_ids,
    vocab: EmotionVocabulary,
    mode: str = "lenient",
) -> ParsedReply:
    """Inverse of :func:`format_ai_target`.

    Strict mode demands the exact grammar and raises
    :class:`ParseError` otherwise; lenient mode falls back to
    ``(default_label, full decoded text)`` with a warning flag.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown parse mode {mode!r}")
    ids = [int(t) for t in token_ids]
    emo_begin = tokenizer.token("emo_begin")
    emo_end = tokenizer.token("emo_end")
    eos = tokenizer.token("eos")

    def fail(reason: str) -> ParsedReply:
        if mode == "strict":
            raise ParseError(reason)
        return ParsedReply(vocab.default_label, tokenizer.decode(ids).strip(), warning=True)

    if not ids or ids[0] != emo_begin:
        return fail("output does not start with the emotion tag")
    if emo_end not in ids:
        return fail("unterminated emotion tag")
    end_idx = ids.index(emo_end)
    label = tokenizer.decode(ids[1:end_idx]).strip()
    if label not in vocab:
        return fail(f"unknown emotion label {label!r}")
    body = ids[end_idx + 1 :]
    if eos in body:
        body = body[: body.index(eos)]
    if any(tokenizer.is_special(t) for t in body):
        return fail("reserved marker inside response text")
    text = tokenizer.decode(body)
    if not text:
        return fail("empty response text")
    return ParsedReply(label, text, warning=False)
