"""Decoder plus modality projections: scoring and generation over mixed sequences."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from avemo.errors import ContextOverflow, EmptyInput
from avemo.lm.decoder import CausalDecoder, DecoderConfig
from avemo.lm.sequence import AUDIO, VISUAL, FeatureSegment, MixedSequence, TextSegment
from avemo.lm.tokenizer import ByteTokenizer


@dataclass(frozen=True)
class DecodeConfig:
    mode: str = "greedy"  # "greedy" | "top_p"
    top_p: float = 0.9
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("greedy", "top_p"):
            raise ValueError(f"unknown decode mode {self.mode!r}")


class DialogueModel(nn.Module):
    """Tokenizer, causal decoder, and per-modality feature projections."""

    def __init__(self, tokenizer: ByteTokenizer, decoder_cfg: DecoderConfig, d_audio: int, d_visual: int):
        super().__init__()
        if decoder_cfg.vocab_size < tokenizer.vocab_size:
            raise ValueError("decoder vocab smaller than tokenizer vocab")
        self.tokenizer = tokenizer
        self.decoder = CausalDecoder(decoder_cfg)
        self.d_audio = d_audio
        self.d_visual = d_visual
        self.audio_proj = nn.Linear(d_audio, decoder_cfg.d_model)
        self.visual_proj = nn.Linear(d_visual, decoder_cfg.d_model)
        # projected feature rows should start out on the token-embedding
        # scale, or the frozen decoder sees wildly out-of-distribution input
        for proj in (self.audio_proj, self.visual_proj):
            nn.init.normal_(proj.weight, std=0.02 / (proj.in_features ** 0.5))
            nn.init.zeros_(proj.bias)

    @property
    def context_len(self) -> int:
        return self.decoder.cfg.context_len

    def project_features(self, features: torch.Tensor, kind: str) -> torch.Tensor:
        """Affine map into the decoder embedding space; row count preserved."""
        features = torch.as_tensor(features)
        if features.ndim != 2 or features.shape[0] == 0:
            raise EmptyInput("features must be (rows, dim) with rows >= 1")
        if kind == AUDIO:
            return self.audio_proj(features)
        if kind == VISUAL:
            return self.visual_proj(features)
        raise ValueError(f"unknown feature kind {kind!r}")

    def embed_sequence(self, seq: MixedSequence) -> torch.Tensor:
        rows = []
        for seg in seq.segments:
            if isinstance(seg, TextSegment):
                ids = torch.tensor(seg.tokens, dtype=torch.long)
                rows.append(self.decoder.tok_emb(ids))
            elif isinstance(seg, FeatureSegment):
                rows.append(self.project_features(seg.features, seg.kind))
            else:
                raise TypeError(f"unknown segment type {type(seg)!r}")
        return torch.cat(rows, dim=0)

    def score(self, seq: MixedSequence) -> torch.Tensor:
        """Per-position log-probability rows, shape (len, vocab).

        Row t is the distribution over the token at position t given
        strictly earlier positions only.
        """
        emb = self.embed_sequence(seq).unsqueeze(0)
        logits = self.decoder.forward_embeddings(emb)[0, : seq.total_len]
        return F.log_softmax(logits, dim=-1)

    def score_batch(self, seqs: list[MixedSequence]):
        """Right-padded batch scoring.

        Returns (log_probs (B, L, vocab), targets (B, L), mask (B, L));
        padded positions carry a False mask.
        """
        lengths = [seq.total_len for seq in seqs]
        max_len = max(lengths)
        d_model = self.decoder.cfg.d_model
        emb = torch.zeros(len(seqs), max_len, d_model)
        targets = torch.zeros(len(seqs), max_len, dtype=torch.long)
        mask = torch.zeros(len(seqs), max_len, dtype=torch.bool)
        for i, seq in enumerate(seqs):
            emb[i, : lengths[i]] = self.embed_sequence(seq)
            targets[i, : lengths[i]] = seq.target_tokens()
            mask[i, : lengths[i]] = seq.target_mask()
        logits = self.decoder.forward_embeddings(emb, lengths=torch.tensor(lengths))
        log_probs = F.log_softmax(logits[:, :max_len], dim=-1)
        return log_probs, targets, mask

    @torch.no_grad()
    def generate(self, prefix: MixedSequence, decode: DecodeConfig | None = None, max_new: int = 64) -> list[int]:
        """Autoregressive continuation of a prefix; stops at eos or max_new.

        Greedy decoding is deterministic; top-p is deterministic given
        the decode seed.
        """
        decode = decode or DecodeConfig()
        if prefix.total_len + 1 > self.context_len:
            raise ContextOverflow(f"prefix of {prefix.total_len} leaves no room to generate")
        if max_new == 0:
            return []
        budget = min(max_new, self.context_len - prefix.total_len)

        generator = None
        if decode.mode == "top_p":
            generator = torch.Generator()
            generator.manual_seed(decode.seed)

        emb = self.embed_sequence(prefix).unsqueeze(0)
        logits, past = self.decoder.prefill(emb)
        eos = self.tokenizer.token("eos")
        out: list[int] = []
        position = prefix.total_len
        while len(out) < budget:
            token = self._pick(logits[0], decode, generator)
            out.append(token)
            if token == eos:
                break
            if len(out) >= budget:
                break
            row = self.decoder.tok_emb(torch.tensor([[token]]))
            logits, past = self.decoder.step(row, past, position)
            position += 1
        return out

    def _pick(self, logits: torch.Tensor, decode: DecodeConfig, generator) -> int:
        if decode.mode == "greedy":
            return int(torch.argmax(logits).item())
        probs = F.softmax(logits / max(decode.temperature, 1e-6), dim=-1)
        sorted_probs, sorted_idx = torch.sort(probs, descending=True)
        cum = torch.cumsum(sorted_probs, dim=-1)
        keep = cum - sorted_probs < decode.top_p  # always keeps the top token
        kept = sorted_probs * keep
        kept = kept / kept.sum()
        choice = torch.multinomial(kept, 1, generator=generator)
        return int(sorted_idx[choice].item())
