"""Dialogue, turn, and speaker-metadata records.

All types are immutable after construction and safe to share across
threads. A dialogue is a strict alternation user/ai starting with the
user, so a dialogue with ``2R`` turns has ``R`` rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from avemo.core.vocab import INTENSITY_LEVELS, EmotionVocabulary
from avemo.errors import InvariantViolation

USER = "user"
AI = "ai"


@dataclass(frozen=True)
class SpeakerMetadata:
    """Optional per-speaker annotations; absent fields render to nothing."""

    emotion: str | None = None
    emotion_intensity: str | None = None
    emotion_description: str | None = None
    gender: str | None = None
    age: int | None = None
    ethnicity: str | None = None

    def __post_init__(self):
        if self.emotion_intensity is not None and self.emotion_intensity not in INTENSITY_LEVELS:
            raise InvariantViolation(
                f"emotion_intensity must be one of {INTENSITY_LEVELS}, got {self.emotion_intensity!r}",
                field="emotion_intensity",
            )
        for name in ("emotion", "emotion_description", "gender", "ethnicity"):
            value = getattr(self, name)
            if value is not None and not str(value).strip():
                raise InvariantViolation(f"{name} present but empty", field=name)
        if self.age is not None and int(self.age) < 0:
            raise InvariantViolation("age must be non-negative", field="age")

    def is_empty(self) -> bool:
        return all(
            getattr(self, f) is None
            for f in ("emotion", "emotion_intensity", "emotion_description", "gender", "age", "ethnicity")
        )

    def to_dict(self) -> dict:
        out = {}
        for name in ("emotion", "emotion_intensity", "emotion_description", "gender", "age", "ethnicity"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SpeakerMetadata":
        return cls(**{k: data[k] for k in data})


@dataclass(frozen=True)
class UtteranceRecord:
    """One turn of a dialogue, or a standalone tagged utterance."""

    speaker: str
    transcript: str
    emotion: str
    audio_ref: str | None = None
    video_ref: str | None = None
    metadata: SpeakerMetadata = field(default_factory=SpeakerMetadata)
    facial_description: str | None = None

    def __post_init__(self):
        if self.speaker not in (USER, AI):
            raise InvariantViolation(f"speaker must be 'user' or 'ai', got {self.speaker!r}", field="speaker")
        if self.speaker == AI and (self.audio_ref or self.video_ref):
            raise InvariantViolation("ai turns never carry media references", field="audio_ref")

    def validate_emotion(self, vocab: EmotionVocabulary, index: int | None = None):
        if self.emotion not in vocab:
            raise InvariantViolation(
                f"emotion {self.emotion!r} not in vocabulary", record_index=index, field="emotion"
            )

    def to_dict(self) -> dict:
        out = {"speaker": self.speaker, "transcript": self.transcript, "emotion": self.emotion}
        if self.audio_ref is not None:
            out["audio_ref"] = self.audio_ref
        if self.video_ref is not None:
            out["video_ref"] = self.video_ref
        if not self.metadata.is_empty():
            out["metadata"] = self.metadata.to_dict()
        if self.facial_description is not None:
            out["facial_description"] = self.facial_description
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "UtteranceRecord":
        return cls(
            speaker=data["speaker"],
            transcript=data["transcript"],
            emotion=data["emotion"],
            audio_ref=data.get("audio_ref"),
            video_ref=data.get("video_ref"),
            metadata=SpeakerMetadata.from_dict(data.get("metadata", {})),
            facial_description=data.get("facial_description"),
        )


@dataclass(frozen=True)
class Dialogue:
    """Strictly alternating user/ai turns, user first, whole rounds only."""

    dialogue_id: str
    turns: tuple[UtteranceRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        if not self.turns:
            raise InvariantViolation("dialogue has no turns", field="turns")
        if len(self.turns) % 2 != 0:
            raise InvariantViolation(
                f"dialogue {self.dialogue_id!r} has odd turn count {len(self.turns)}", field="turns"
            )
        for i, turn in enumerate(self.turns):
            expected = USER if i % 2 == 0 else AI
            if turn.speaker != expected:
                raise InvariantViolation(
                    f"dialogue {self.dialogue_id!r} turn {i} should be {expected}, got {turn.speaker}",
                    record_index=i,
                    field="speaker",
                )

    @property
    def num_rounds(self) -> int:
        return len(self.turns) // 2

    def to_dict(self) -> dict:
        return {"dialogue_id": self.dialogue_id, "turns": [t.to_dict() for t in self.turns]}

    @classmethod
    def from_dict(cls, data: dict) -> "Dialogue":
        return cls(
            dialogue_id=data["dialogue_id"],
            turns=tuple(UtteranceRecord.from_dict(t) for t in data["turns"]),
        )


def split_rounds(dialogue: Dialogue) -> list[tuple[tuple[UtteranceRecord, ...], UtteranceRecord, UtteranceRecord]]:
    """Split a dialogue into per-round triples ``(history, user, ai)``.

    Triple ``r`` (0-based) has a history of exactly ``2r`` turns, so the
    last triple's ``history + (user, ai)`` reproduces the full turn list.
    """
    out = []
    for r in range(dialogue.num_rounds):
        history = dialogue.turns[: 2 * r]
        out.append((history, dialogue.turns[2 * r], dialogue.turns[2 * r + 1]))
    return out
