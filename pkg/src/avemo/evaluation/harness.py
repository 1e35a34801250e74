"""Corpus evaluation: sampled assistant turns, generation, metric report.

For every dialogue a seeded sample of up to ``turns_per_dialogue``
assistant turns is regenerated with teacher-forced history (the ground
truth prior rounds), parsed leniently, and scored. Sentence-level
scores are averaged; Distinct-1 pools over the whole corpus; perplexity
pools token NLL across the set. The default perplexity scorer is the
system's own byte decoder, so absolute PPL is scorer-relative and the
report says so.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from avemo.core.manifest import DatasetManifest
from avemo.core.vocab import EmotionVocabulary
from avemo.evaluation.emotion import EmotionEmbedder, LexiconEmotionEmbedder, cosine_with_flag
from avemo.evaluation.metrics import TokenScorer, bleu_n, distinct_1, meteor, perplexity, rouge_l
from avemo.evaluation.text_tokenizer import METRIC_TOKENIZER_VERSION, tokenize
from avemo.lm.model import DecodeConfig
from avemo.lm.sequence import MixedSequence, TextSegment
from avemo.prompts import PROMPT_SET_HASH, parse_ai_output
from avemo.training.builders import DEFAULT_MODALITIES, build_stage3_context, precompute_features, stage3_materials

import logging

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalConfig:
    turns_per_dialogue: int = 4
    seed: int = 0
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    modalities: tuple[str, ...] = DEFAULT_MODALITIES
    max_new: int = 96
    meteor_matcher: str = "exact"


@dataclass
class MetricReport:
    bleu1: float
    bleu4: float
    rouge_l: float
    meteor: float
    distinct1: float
    emobert: float
    ppl: float
    n_samples: int
    emotion_accuracy: float
    parse_warnings: int
    zero_embedding_flags: int
    protocol: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path

    def table_row(self) -> str:
        """One-line summary mirroring the usual column order."""
        return (
            f"BLEU-1 {self.bleu1:.3f} | BLEU-4 {self.bleu4:.4f} | ROUGE {self.rouge_l:.3f} | "
            f"METEOR {self.meteor:.3f} | PPL {self.ppl:.3f} | EmoBERT {self.emobert:.2f} | "
            f"Dist-1 {self.distinct1:.3f}"
        )


class DecoderTextScorer:
    """Word-level log-probabilities from the system's byte decoder.

    Each word token receives the summed byte NLL of its span (including
    its separating space), so pooled perplexity stays consistent with
    the byte model's total NLL over the joined text.
    """

    def __init__(self, system):
        self.system = system

    def score_tokens(self, tokens):
        import torch

        text = " ".join(tokens)
        tokenizer = self.system.tokenizer
        ids = tokenizer.encode(text)
        seq = MixedSequence(
            (TextSegment(tuple(ids)),),
            context_len=self.system.cfg.decoder.context_len,
            pad_id=tokenizer.token("pad"),
        )
        with torch.no_grad():
            rows = self.system.model.score(seq)
        byte_logps = rows.gather(-1, torch.tensor(ids).unsqueeze(-1)).squeeze(-1).tolist()

        out = []
        cursor = 0
        for i, tok in enumerate(tokens):
            n_bytes = len(tok.encode("utf-8")) + (1 if i < len(tokens) - 1 else 0)
            out.append(sum(byte_logps[cursor : cursor + n_bytes]))
            cursor += n_bytes
        return out


@dataclass
class GeneratedTurn:
    dialogue_id: str
    round_index: int
    hyp_text: str
    ref_text: str
    hyp_emotion: str
    ref_emotion: str
    warning: bool


def generate_turns(
    system,
    manifest: DatasetManifest,
    cfg: EvalConfig,
    vocab: EmotionVocabulary,
) -> list[GeneratedTurn]:
    materials = stage3_materials(
        manifest, system.tokenizer, vocab, cfg.modalities, system.cfg.mel, system.cfg.video
    )
    precompute_features(system, materials)
    turns = []
    for item in materials:
        n_rounds = len(item.rounds)
        k = min(cfg.turns_per_dialogue, n_rounds)
        rng = random.Random(f"{cfg.seed}:{item.dialogue_id}")
        chosen = sorted(rng.sample(range(n_rounds), k))
        for r in chosen:
            context = build_stage3_context(system, item.rounds[:r], item.rounds[r], cfg.modalities)
            ids = system.model.generate(context, cfg.decode, cfg.max_new)
            parsed = parse_ai_output(system.tokenizer, ids, vocab, mode="lenient")
            turns.append(
                GeneratedTurn(
                    dialogue_id=item.dialogue_id,
                    round_index=r,
                    hyp_text=parsed.text,
                    ref_text=item.rounds[r].ai_text,
                    hyp_emotion=parsed.emotion,
                    ref_emotion=item.rounds[r].ai_emotion,
                    warning=parsed.warning,
                )
            )
    return turns


def evaluate_corpus(
    system,
    manifest: DatasetManifest,
    cfg: EvalConfig | None = None,
    vocab: EmotionVocabulary | None = None,
    ppl_scorer: TokenScorer | None = None,
    embedder: EmotionEmbedder | None = None,
) -> MetricReport:
    cfg = cfg or EvalConfig()
    vocab = vocab or EmotionVocabulary()
    if manifest.split != "test":
        log.warning("evaluating a %r split; the standard protocol uses the test split", manifest.split)
    turns = generate_turns(system, manifest, cfg, vocab)
    if not turns:
        from avemo.errors import EmptyCorpus

        raise EmptyCorpus("no dialogue-tagged records to evaluate")

    embedder = embedder or LexiconEmotionEmbedder()
    ppl_scorer = ppl_scorer or DecoderTextScorer(system)

    hyp_tokens = [tokenize(t.hyp_text) for t in turns]
    ref_tokens = [tokenize(t.ref_text) for t in turns]

    def mean(values):
        return sum(values) / len(values)

    emo_scores = []
    zero_flags = 0
    for t in turns:
        raw, flagged = cosine_with_flag(embedder, t.hyp_text, t.ref_text)
        zero_flags += int(flagged)
        emo_scores.append(min(max(raw, 0.0), 1.0))

    scoreable = [h for h in hyp_tokens if h]
    report = MetricReport(
        bleu1=mean([bleu_n(h, [r], 1) for h, r in zip(hyp_tokens, ref_tokens)]),
        bleu4=mean([bleu_n(h, [r], 4) for h, r in zip(hyp_tokens, ref_tokens)]),
        rouge_l=mean([rouge_l(h, r) for h, r in zip(hyp_tokens, ref_tokens)]),
        meteor=mean([meteor(h, r, cfg.meteor_matcher) for h, r in zip(hyp_tokens, ref_tokens)]),
        distinct1=distinct_1(hyp_tokens) if any(hyp_tokens) else 0.0,
        emobert=mean(emo_scores),
        ppl=perplexity(ppl_scorer, scoreable) if scoreable else float("inf"),
        n_samples=len(turns),
        emotion_accuracy=mean([float(t.hyp_emotion == t.ref_emotion) for t in turns]),
        parse_warnings=sum(t.warning for t in turns),
        zero_embedding_flags=zero_flags,
        protocol={
            "turns_per_dialogue": cfg.turns_per_dialogue,
            "seed": cfg.seed,
            "decode": asdict(cfg.decode),
            "modalities": list(cfg.modalities),
            "max_new": cfg.max_new,
            "split": manifest.split,
            "metric_tokenizer_version": METRIC_TOKENIZER_VERSION,
            "meteor_matcher": cfg.meteor_matcher,
            "ppl_scorer": type(ppl_scorer).__name__,
            "ppl_note": "absolute PPL is scorer-relative",
            "prompt_set_hash": PROMPT_SET_HASH,
            "system_config_hash": system.cfg.config_hash(),
        },
    )
    return report
