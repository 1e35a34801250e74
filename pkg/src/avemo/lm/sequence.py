"""Mixed text/feature input sequences for the decoder.

A :class:`MixedSequence` is an ordered list of segments, each either
text tokens or a block of encoder feature rows. Flattened, every
segment row occupies one decoder position; the target mask is true
exactly at the text positions of target segments, never at feature
rows. Audio and visual spans are wrapped in their begin/end marker
tokens at assembly time (audio before visual by default; the order is a
config switch).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from avemo.errors import ContextOverflow, EmptyInput
from avemo.lm.tokenizer import ByteTokenizer

DEFAULT_CONTEXT_LEN = 4096

AUDIO = "audio"
VISUAL = "visual"


@dataclass(frozen=True)
class TextSegment:
    tokens: tuple[int, ...]
    is_target: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class FeatureSegment:
    kind: str  # AUDIO or VISUAL
    features: torch.Tensor  # (rows, d_kind)

    def __post_init__(self):
        if self.kind not in (AUDIO, VISUAL):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise EmptyInput("feature segment must be (rows, dim) with rows >= 1")

    def __len__(self):
        return int(self.features.shape[0])


Segment = TextSegment | FeatureSegment


@dataclass(frozen=True)
class MixedSequence:
    segments: tuple[Segment, ...]
    context_len: int = DEFAULT_CONTEXT_LEN
    pad_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise EmptyInput("sequence needs at least one segment")
        if self.total_len > self.context_len:
            raise ContextOverflow(
                f"sequence length {self.total_len} exceeds context {self.context_len}"
            )

    @property
    def total_len(self) -> int:
        return sum(len(s) for s in self.segments)

    def target_mask(self) -> torch.Tensor:
        flags = []
        for seg in self.segments:
            value = isinstance(seg, TextSegment) and seg.is_target
            flags.extend([value] * len(seg))
        return torch.tensor(flags, dtype=torch.bool)

    def target_tokens(self) -> torch.Tensor:
        ids = []
        for seg in self.segments:
            if isinstance(seg, TextSegment):
                ids.extend(seg.tokens)
            else:
                ids.extend([self.pad_id] * len(seg))
        return torch.tensor(ids, dtype=torch.long)

    def with_appended(self, segment: Segment) -> "MixedSequence":
        return MixedSequence(self.segments + (segment,), self.context_len, self.pad_id)


def _text(tokenizer: ByteTokenizer, text: str, is_target: bool = False) -> TextSegment:
    return TextSegment(tuple(tokenizer.encode(text)), is_target=is_target)


def feature_span(tokenizer: ByteTokenizer, kind: str, features: torch.Tensor) -> list[Segment]:
    begin = tokenizer.token(f"{'audio' if kind == AUDIO else 'video'}_begin")
    end = tokenizer.token(f"{'audio' if kind == AUDIO else 'video'}_end")
    return [TextSegment((begin,)), FeatureSegment(kind, features), TextSegment((end,))]


def assemble_input(
    tokenizer: ByteTokenizer,
    system_text: str | None = None,
    history: list[Segment] | None = None,
    metadata_text: str | None = None,
    f_a: torch.Tensor | None = None,
    f_v: torch.Tensor | None = None,
    target_tokens: tuple[int, ...] | None = None,
    context_len: int = DEFAULT_CONTEXT_LEN,
    audio_first: bool = True,
) -> MixedSequence:
    """Build a sequence in canonical order.

    Order: system prompt, history, metadata text, audio span, video
    span, target. Absent parts vanish. Raises :class:`ContextOverflow`
    when the result exceeds ``context_len`` (history truncation is the
    caller's job; this assembler never drops content silently).
    """
    segments: list[Segment] = []
    if system_text:
        segments.append(_text(tokenizer, system_text))
    if history:
        segments.extend(history)
    if metadata_text:
        segments.append(_text(tokenizer, metadata_text))
    spans = []
    if f_a is not None:
        spans.append(feature_span(tokenizer, AUDIO, f_a))
    if f_v is not None:
        spans.append(feature_span(tokenizer, VISUAL, f_v))
    if not audio_first:
        spans.reverse()
    for span in spans:
        segments.extend(span)
    if target_tokens is not None:
        segments.append(TextSegment(tuple(target_tokens), is_target=True))
    return MixedSequence(tuple(segments), context_len=context_len, pad_id=tokenizer.token("pad"))
