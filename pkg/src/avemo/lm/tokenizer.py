"""Byte-level tokenizer with reserved special tokens.

Ordinary text encodes to its UTF-8 bytes (ids 0..255), so the special
ids above 255 can never be produced by encoding text. This is the
zero-dependency fallback tokenizer; an external tokenizer can replace
it behind the same surface as long as it honors the same contract.
"""

from __future__ import annotations

from dataclasses import dataclass, field

SPECIAL_TOKENS = (
    "bos",
    "eos",
    "pad",
    "audio_begin",
    "audio_end",
    "video_begin",
    "video_end",
    "emo_begin",
    "emo_end",
)


@dataclass(frozen=True)
class ByteTokenizer:
    base_size: int = 256
    specials: tuple[str, ...] = SPECIAL_TOKENS
    _ids: dict = field(init=False, repr=False, hash=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_ids", {name: self.base_size + i for i, name in enumerate(self.specials)}
        )

    @property
    def vocab_size(self) -> int:
        return self.base_size + len(self.specials)

    def token(self, name: str) -> int:
        return self._ids[name]

    def is_special(self, token_id: int) -> bool:
        return token_id >= self.base_size

    def encode(self, text: str) -> list[int]:
        return list(text.encode("utf-8"))

    def decode(self, ids, keep_special: bool = False) -> str:
        parts: list[str] = []
        byte_run = bytearray()

        def flush():
            if byte_run:
                parts.append(byte_run.decode("utf-8", errors="replace"))
                byte_run.clear()

        for tid in ids:
            if tid < self.base_size:
                byte_run.append(tid)
            else:
                flush()
                if keep_special:
                    parts.append(f"<{self.specials[tid - self.base_size]}>")
        flush()
        return "".join(parts)

    def to_dict(self) -> dict:
        return {"kind": "byte", "base_size": self.base_size, "specials": list(self.specials)}

    @classmethod
    def from_dict(cls, data: dict) -> "ByteTokenizer":
        if data.get("kind") != "byte":
            raise ValueError(f"unsupported tokenizer kind {data.get('kind')!r}")
        return cls(base_size=data["base_size"], specials=tuple(data["specials"]))
