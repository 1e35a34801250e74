"""Pure-Python text-metric kernels.

Fallback for :mod:`avemo.evaluation._ngram_cy`; identical semantics.
Token sequences arrive as lists of small non-negative ints (interned
token ids, see :mod:`avemo.evaluation.metrics`).
"""

from collections import Counter


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence of two id sequences."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return 0
    prev = [0] * (m + 1)
    cur = [0] * (m + 1)
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = cur[j - 1] if cur[j - 1] >= prev[j] else prev[j]
        prev, cur = cur, prev
    return prev[m]


def clipped_matches(cand, ref, n: int) -> int:
    """Candidate n-gram count clipped by reference n-gram counts."""
    if len(cand) < n or len(ref) < n:
        return 0
    ref_counts = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
    cand_counts = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
    return sum(min(c, ref_counts[g]) for g, c in cand_counts.items() if g in ref_counts)
