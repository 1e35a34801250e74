"""Emotion label vocabulary."""

from __future__ import annotations

from dataclasses import dataclass, field

from avemo.errors import InvariantViolation, UnknownEmotion

DEFAULT_LABELS = (
    "happy",
    "sad",
    "surprised",
    "fearful",
    "disgusted",
    "angry",
    "neutral",
)

INTENSITY_LEVELS = ("low", "medium", "high", "unspecified")


@dataclass(frozen=True)
class EmotionVocabulary:
    """Ordered set of lowercase emotion names plus a fallback label.

    The default seven-label set covers the common audio-visual emotion
    corpora; datasets with extra labels (e.g. "calm") pass their own list.
    """

    labels: tuple[str, ...] = DEFAULT_LABELS
    default_label: str = "neutral"

    def __post_init__(self):
        if not self.labels:
            raise InvariantViolation("vocabulary must be non-empty", field="labels")
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise InvariantViolation("duplicate emotion labels", field="labels")
        for name in self.labels:
            if name != name.lower():
                raise InvariantViolation(f"label not lowercase: {name!r}", field="labels")
        if self.default_label not in self.labels:
            raise InvariantViolation(
                f"default label {self.default_label!r} not in vocabulary", field="default_label"
            )

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def require(self, label: str) -> str:
        """Return the label unchanged or raise :class:`UnknownEmotion`."""
        if label not in self.labels:
            raise UnknownEmotion(f"unknown emotion {label!r}; expected one of {list(self.labels)}")
        return label

    def coerce(self, label: str, strict: bool = True) -> tuple[str, bool]:
        """Map a raw label into the vocabulary.

        Returns ``(label, was_fallback)``. In lenient mode unknown labels
        map to the default label instead of raising.
        """
        if label in self.labels:
            return label, False
        if strict:
            raise UnknownEmotion(f"unknown emotion {label!r}")
        return self.default_label, True
