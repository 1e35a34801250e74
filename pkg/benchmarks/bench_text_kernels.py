"""Compares the compiled text-metric kernels against the pure-Python fallback.

Run:  python3 benchmarks/bench_text_kernels.py
"""

import random
import statistics
import time

from avemo.evaluation import _ngram_py

try:
    from avemo.evaluation import _ngram_cy
except ImportError:
    _ngram_cy = None


def make_pairs(rng, n_pairs, length, vocab=50):
    return [
        (
            [rng.randrange(vocab) for _ in range(length)],
            [rng.randrange(vocab) for _ in range(length)],
        )
        for _ in range(n_pairs)
    ]


def time_backend(fn, pairs, repeats=5):
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        for a, b in pairs:
            fn(a, b)
        timings.append(time.perf_counter() - start)
    return min(timings)


def bench(name, py_fn, cy_fn, pairs):
    py_time = time_backend(py_fn, pairs)
    row = f"{name:<28} python {py_time * 1e3:8.2f} ms"
    if cy_fn is not None:
        cy_time = time_backend(cy_fn, pairs)
        row += f"   cython {cy_time * 1e3:8.2f} ms   speedup {py_time / cy_time:6.2f}x"
    print(row)


def main():
    rng = random.Random(0)
    print(f"compiled backend available: {_ngram_cy is not None}\n")
    for length in (16, 64, 256):
        pairs = make_pairs(rng, n_pairs=200, length=length)
        bench(
            f"lcs_length (len {length})",
            _ngram_py.lcs_length,
            _ngram_cy.lcs_length if _ngram_cy else None,
            pairs,
        )
    for order in (1, 4):
        pairs = make_pairs(rng, n_pairs=500, length=64)
        bench(
            f"clipped_matches (n={order})",
            lambda a, b, n=order: _ngram_py.clipped_matches(a, b, n),
            (lambda a, b, n=order: _ngram_cy.clipped_matches(a, b, n)) if _ngram_cy else None,
            pairs,
        )

    # sanity: identical outputs on a fresh sample
    check = make_pairs(rng, n_pairs=50, length=32)
    if _ngram_cy is not None:
        for a, b in check:
            assert _ngram_py.lcs_length(a, b) == _ngram_cy.lcs_length(a, b)
            assert _ngram_py.clipped_matches(a, b, 2) == _ngram_cy.clipped_matches(a, b, 2)
        print("\nbackends agree on 50 random pairs")


if __name__ == "__main__":
    main()
