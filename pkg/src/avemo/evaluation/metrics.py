"""Corpus text metrics: BLEU-n, ROUGE-L, METEOR, Distinct-1, perplexity.

All metrics operate on pre-tokenized token lists (see
:mod:`avemo.evaluation.text_tokenizer`) and are pure functions. Each has
an independent brute-force oracle in the test suite; the implementations
here stay deliberately close to the textbook definitions.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Protocol, Sequence

from avemo.errors import EmptyCorpus, ScorerFailure
from avemo.evaluation import kernels

# Beyond this many shared reference positions the exact METEOR chunk
# search switches to a greedy alignment (never reached at desk scale).
_EXACT_CHUNK_LIMIT = 20


def _intern(*token_lists: Sequence[str]) -> list[list[int]]:
    """Map tokens to small ints shared across the given lists."""
    table: dict[str, int] = {}
    out = []
    for tokens in token_lists:
        ids = []
        for tok in tokens:
            if tok not in table:
                table[tok] = len(table)
            ids.append(table[tok])
        out.append(ids)
    return out


# -- BLEU ---------------------------------------------------------------------

def bleu_n(candidate: Sequence[str], references: Sequence[Sequence[str]], n: int) -> float:
    """Clipped n-gram precision with brevity penalty, geometric mean 1..n.

    Empty candidates and candidates with zero matches at any order score
    0. With multiple references, clipping uses the per-gram maximum and
    the brevity penalty uses the closest reference length (ties favor
    the shorter reference).
    """
    if n < 1 or n > 4:
        raise ValueError("n must be in 1..4")
    c = len(candidate)
    if c == 0:
        return 0.0
    interned = _intern(candidate, *references)
    cand_ids, ref_ids = interned[0], interned[1:]

    log_sum = 0.0
    for order in range(1, n + 1):
        total = max(c - order + 1, 0)
        if total == 0:
            return 0.0
        clipped = 0
        # per-gram max over references == max of per-reference clipped sums
        # only for a single reference; with several, merge counts first.
        if len(ref_ids) == 1:
            clipped = kernels.clipped_matches(cand_ids, ref_ids[0], order)
        else:
            merged: Counter = Counter()
            for ref in ref_ids:
                counts = Counter(tuple(ref[i : i + order]) for i in range(len(ref) - order + 1))
                for gram, cnt in counts.items():
                    merged[gram] = max(merged[gram], cnt)
            cand_counts = Counter(tuple(cand_ids[i : i + order]) for i in range(c - order + 1))
            clipped = sum(min(cnt, merged[g]) for g, cnt in cand_counts.items() if g in merged)
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total) / n

    ref_lens = [len(r) for r in references]
    r = min(ref_lens, key=lambda L: (abs(L - c), L))
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum)


# -- ROUGE-L ------------------------------------------------------------------

def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """LCS-based F1 between candidate and reference."""
    if not candidate or not reference:
        return 0.0
    cand_ids, ref_ids = _intern(candidate, reference)
    lcs = kernels.lcs_length(cand_ids, ref_ids)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return 2.0 * p * r / (p + r)


# -- METEOR -------------------------------------------------------------------

_STEM_SUFFIXES = ("ingly", "edly", "ing", "ed", "ly", "ies", "es", "s")


def _light_stem(token: str) -> str:
    for suffix in _STEM_SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            return token[: -len(suffix)]
    return token


def _min_chunks_exact(cand_keys: list, ref_keys: list) -> tuple[int, int]:
    """Exact (matches, chunks): maximum matching minimizing chunk count.

    Memoized DFS over (candidate position, used reference positions,
    last matched reference position). Only reference positions whose
    token also occurs in the candidate participate.
    """
    cand_types = set(cand_keys)
    ref_pos = [j for j, k in enumerate(ref_keys) if k in cand_types]
    if len(ref_pos) > _EXACT_CHUNK_LIMIT:
        return _min_chunks_greedy(cand_keys, ref_keys)
    pos_index = {j: i for i, j in enumerate(ref_pos)}
    options = {
        i: [j for j in ref_pos if ref_keys[j] == k]
        for i, k in enumerate(cand_keys)
        if k in set(ref_keys)
    }

    from functools import lru_cache

    @lru_cache(maxsize=None)
    def best(i: int, used: int, last_ref: int) -> tuple[int, int]:
        """Max (matches, -chunks) from candidate position i onward."""
        if i == len(cand_keys):
            return (0, 0)
        # skip candidate position i
        matches, neg_chunks = best(i + 1, used, -2)
        for j in options.get(i, ()):
            bit = 1 << pos_index[j]
            if used & bit:
                continue
            m2, nc2 = best(i + 1, used | bit, j)
            new_chunk = 0 if j == last_ref + 1 and last_ref >= 0 else 1
            cand_val = (m2 + 1, nc2 - new_chunk)
            if cand_val > (matches, neg_chunks):
                matches, neg_chunks = cand_val
        return (matches, neg_chunks)

    m, neg = best(0, 0, -2)
    return m, -neg


def _min_chunks_greedy(cand_keys: list, ref_keys: list) -> tuple[int, int]:
    """Greedy fallback: prefer continuing the current chunk, else leftmost."""
    ref_counts = Counter(ref_keys)
    budget = {k: min(c, ref_counts[k]) for k, c in Counter(cand_keys).items() if k in ref_counts}
    used = [False] * len(ref_keys)
    last = -2
    matches = chunks = 0
    for key in cand_keys:
        if budget.get(key, 0) <= 0:
            last = -2
            continue
        pick = None
        if 0 <= last + 1 < len(ref_keys) and not used[last + 1] and ref_keys[last + 1] == key:
            pick = last + 1
        else:
            for j, rk in enumerate(ref_keys):
                if rk == key and not used[j]:
                    pick = j
                    break
        if pick is None:
            last = -2
            continue
        used[pick] = True
        budget[key] -= 1
        matches += 1
        if pick != last + 1:
            chunks += 1
        last = pick
    return matches, chunks


def meteor(candidate: Sequence[str], reference: Sequence[str], matcher: str = "exact") -> float:
    """Alignment F-mean with a fragmentation penalty.

    F_mean = P*R / (0.9*P + 0.1*R), penalty = 0.5 * (chunks/matches)^3,
    score = F_mean * (1 - penalty). Chunks are minimized over all
    maximum alignments. Zero matches scores 0.
    """
    if matcher not in ("exact", "exact+stem"):
        raise ValueError(f"unknown matcher {matcher!r}")
    if not candidate or not reference:
        return 0.0
    if matcher == "exact+stem":
        cand_keys = [_light_stem(t) for t in candidate]
        ref_keys = [_light_stem(t) for t in reference]
    else:
        cand_keys = list(candidate)
        ref_keys = list(reference)

    matches, chunks = _min_chunks_exact(cand_keys, ref_keys)
    if matches == 0:
        return 0.0
    p = matches / len(candidate)
    r = matches / len(reference)
    f_mean = p * r / (0.9 * p + 0.1 * r)
    penalty = 0.5 * (chunks / matches) ** 3
    return f_mean * (1.0 - penalty)


# -- Distinct-1 ---------------------------------------------------------------

def distinct_1(corpus: Sequence[Sequence[str]]) -> float:
    """Unique unigrams over total unigrams, pooled across the corpus."""
    total = sum(len(tokens) for tokens in corpus)
    if total == 0:
        raise EmptyCorpus("distinct-1 needs at least one token")
    unique = len({tok for tokens in corpus for tok in tokens})
    return unique / total


# -- Perplexity ---------------------------------------------------------------

class TokenScorer(Protocol):
    """External LM interface: natural-log probability per token."""

    def score_tokens(self, tokens: Sequence[str]) -> Sequence[float]: ...


def perplexity(scorer: TokenScorer, responses: Sequence[Sequence[str]]) -> float:
    """exp(total NLL / total token count), pooled across all responses."""
    total_nll = 0.0
    total_tokens = 0
    for tokens in responses:
        if not tokens:
            continue
        try:
            logps = scorer.score_tokens(tokens)
        except Exception as exc:
            raise ScorerFailure(f"scorer failed: {exc}") from exc
        if len(logps) != len(tokens):
            raise ScorerFailure("scorer returned wrong number of log-probabilities")
        for lp in logps:
            if not math.isfinite(lp) or lp > 0.0:
                raise ScorerFailure(f"bad log-probability {lp}")
            total_nll -= lp
        total_tokens += len(tokens)
    if total_tokens == 0:
        raise EmptyCorpus("no tokens to score")
    return math.exp(total_nll / total_tokens)


class UniformScorer:
    """Assigns 1/vocab_size to every token; PPL equals vocab_size."""

    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size

    def score_tokens(self, tokens):
        return [-math.log(self.vocab_size)] * len(tokens)
