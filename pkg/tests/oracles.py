"""Brute-force metric oracles, kept independent of the package paths.

Everything here uses naive nested loops and exhaustive enumeration.
These are the reference values the fast implementations must match
exactly; do not "optimize" them.
"""

import math


def naive_ngrams(tokens, n):
    out = []
    for i in range(len(tokens)):
        if i + n <= len(tokens):
            gram = tuple(tokens[i : i + n])
            out.append(gram)
    return out


def naive_count(grams, target):
    c = 0
    for g in grams:
        if g == target:
            c += 1
    return c


def naive_clipped_matches(cand, ref, n):
    cand_grams = naive_ngrams(cand, n)
    ref_grams = naive_ngrams(ref, n)
    total = 0
    seen = []
    for g in cand_grams:
        if g in seen:
            continue
        seen.append(g)
        total += min(naive_count(cand_grams, g), naive_count(ref_grams, g))
    return total


def naive_bleu(cand, refs, n):
    c = len(cand)
    if c == 0:
        return 0.0
    log_sum = 0.0
    for order in range(1, n + 1):
        total = len(naive_ngrams(cand, order))
        if total == 0:
            return 0.0
        clipped = 0
        seen = []
        for g in naive_ngrams(cand, order):
            if g in seen:
                continue
            seen.append(g)
            best = 0
            for ref in refs:
                best = max(best, naive_count(naive_ngrams(ref, order), g))
            clipped += min(naive_count(naive_ngrams(cand, order), g), best)
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total) / n
    best_r = None
    for ref in refs:
        L = len(ref)
        if best_r is None or abs(L - c) < abs(best_r - c) or (abs(L - c) == abs(best_r - c) and L < best_r):
            best_r = L
    bp = 1.0 if c > best_r else math.exp(1.0 - best_r / c)
    return bp * math.exp(log_sum)


def naive_lcs(a, b):
    n, m = len(a), len(b)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[n][m]


def naive_rouge_l(cand, ref):
    if not cand or not ref:
        return 0.0
    lcs = naive_lcs(cand, ref)
    if lcs == 0:
        return 0.0
    p = lcs / len(cand)
    r = lcs / len(ref)
    return 2 * p * r / (p + r)


def _enumerate_alignments(cand, ref):
    """Yield (matches, chunks) for every injective alignment."""

    def rec(i, used, last, matches, chunks):
        if i == len(cand):
            yield matches, chunks
            return
        # leave candidate position i unmatched
        yield from rec(i + 1, used, -2, matches, chunks)
        for j in range(len(ref)):
            if j in used or ref[j] != cand[i]:
                continue
            extra = 0 if j == last + 1 and last >= 0 else 1
            yield from rec(i + 1, used | {j}, j, matches + 1, chunks + extra)

    yield from rec(0, set(), -2, 0, 0)


def naive_meteor(cand, ref):
    if not cand or not ref:
        return 0.0
    best_matches = 0
    best_chunks = 0
    for matches, chunks in _enumerate_alignments(cand, ref):
        if matches > best_matches or (matches == best_matches and matches > 0 and chunks < best_chunks):
            best_matches = matches
            best_chunks = chunks
    if best_matches == 0:
        return 0.0
    p = best_matches / len(cand)
    r = best_matches / len(ref)
    f_mean = p * r / (0.9 * p + 0.1 * r)
    penalty = 0.5 * (best_chunks / best_matches) ** 3
    return f_mean * (1 - penalty)


def naive_distinct_1(corpus):
    seen = []
    total = 0
    for tokens in corpus:
        for tok in tokens:
            total += 1
            if tok not in seen:
                seen.append(tok)
    return len(seen) / total
