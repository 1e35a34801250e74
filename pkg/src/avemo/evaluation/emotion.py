"""Emotion-similarity scoring behind a pluggable embedder interface.

The default desk-scale embedder counts emotion-lexicon hits per label
dimension and normalizes to unit norm. A fine-tuned BERT-style backend
can be dropped in behind the same interface.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from avemo.core.vocab import DEFAULT_LABELS
from avemo.evaluation.text_tokenizer import tokenize

EMOTION_LEXICON: dict[str, tuple[str, ...]] = {
    "happy": (
        "happy", "glad", "joy", "joyful", "delighted", "cheerful", "wonderful",
        "great", "pleased", "love", "lovely", "nice", "fun", "awesome", "smile",
        "smiling", "laughing", "thrilled", "enjoy", "excited",
    ),
    "sad": (
        "sad", "unhappy", "miserable", "gloomy", "depressed", "down", "sorrow",
        "sorry", "crying", "tears", "heartbroken", "awful", "lonely", "blue", "upset",
    ),
    "surprised": (
        "surprised", "surprise", "astonished", "amazed", "amazing", "shocking",
        "shocked", "wow", "unbelievable", "incredible", "unexpected", "crazy",
        "stunned", "whoa",
    ),
    "fearful": (
        "fearful", "fear", "afraid", "scared", "scary", "terrified", "anxious",
        "worried", "frightened", "frightening", "nervous", "dread", "panic",
    ),
    "disgusted": (
        "disgusted", "disgusting", "gross", "nasty", "revolting", "yuck",
        "repulsive", "vile", "sickening", "eww",
    ),
    "angry": (
        "angry", "anger", "mad", "furious", "annoyed", "annoying", "irritated",
        "irritating", "outraged", "rage", "frustrated", "frustrating", "hate",
    ),
    "neutral": (
        "neutral", "okay", "ok", "fine", "alright", "normal", "calm", "sure",
    ),
}


class EmotionEmbedder(Protocol):
    """Deterministic text embedder, unit norm (zero vector allowed)."""

    def embed(self, text: str) -> np.ndarray: ...


class LexiconEmotionEmbedder:
    """Counts lexicon hits per emotion dimension, unit-normalized."""

    def __init__(self, lexicon: dict[str, tuple[str, ...]] | None = None):
        lexicon = lexicon or EMOTION_LEXICON
        self.labels = tuple(lexicon.keys()) if lexicon is not EMOTION_LEXICON else DEFAULT_LABELS
        self._word_to_dim: dict[str, int] = {}
        for dim, label in enumerate(self.labels):
            for word in lexicon[label]:
                self._word_to_dim[word] = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(len(self.labels), dtype=np.float64)
        for tok in tokenize(text):
            dim = self._word_to_dim.get(tok)
            if dim is not None:
                vec[dim] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


def cosine_with_flag(embedder: EmotionEmbedder, hypothesis: str, reference: str) -> tuple[float, bool]:
    """Raw cosine in [-1, 1] plus a flag set when either embedding is zero."""
    h = embedder.embed(hypothesis)
    r = embedder.embed(reference)
    hn = float(np.linalg.norm(h))
    rn = float(np.linalg.norm(r))
    if hn == 0.0 or rn == 0.0:
        return 0.0, True
    return float(np.dot(h, r) / (hn * rn)), False


def emotion_similarity(embedder: EmotionEmbedder, hypothesis: str, reference: str) -> float:
    """Cosine similarity clipped to [0, 1] for reporting."""
    raw, _ = cosine_with_flag(embedder, hypothesis, reference)
    return min(max(raw, 0.0), 1.0)
