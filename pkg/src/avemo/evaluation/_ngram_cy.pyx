# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled text-metric kernels: LCS table fill and clipped n-gram counts.

Semantics match :mod:`avemo.evaluation._ngram_py` exactly; the pure
version is the import-time fallback when this extension is missing.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def lcs_length(a, b):
    """Length of the longest common subsequence of two id sequences."""
    cdef cnp.int64_t[:] aa = np.ascontiguousarray(a, dtype=np.int64)
    cdef cnp.int64_t[:] bb = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = aa.shape[0]
    cdef Py_ssize_t m = bb.shape[0]
    if n == 0 or m == 0:
        return 0
    cdef cnp.int64_t[:] prev = np.zeros(m + 1, dtype=np.int64)
    cdef cnp.int64_t[:] cur = np.zeros(m + 1, dtype=np.int64)
    cdef cnp.int64_t[:] tmp
    cdef Py_ssize_t i, j
    cdef cnp.int64_t ai, left, up
    for i in range(1, n + 1):
        ai = aa[i - 1]
        for j in range(1, m + 1):
            if ai == bb[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                left = cur[j - 1]
                up = prev[j]
                cur[j] = left if left >= up else up
        tmp = prev
        prev = cur
        cur = tmp
    return int(prev[m])


def clipped_matches(cand, ref, int n):
    """Candidate n-gram count clipped by reference n-gram counts.

    Token ids are packed 15 bits per position into a single key, which
    bounds ids at 32768; the metric layer interns per candidate/reference
    pair so real ids stay tiny.
    """
    cdef cnp.int64_t[:] cc = np.ascontiguousarray(cand, dtype=np.int64)
    cdef cnp.int64_t[:] rr = np.ascontiguousarray(ref, dtype=np.int64)
    cdef Py_ssize_t nc = cc.shape[0]
    cdef Py_ssize_t nr = rr.shape[0]
    if nc < n or nr < n or n <= 0 or n > 4:
        if n <= 0 or n > 4:
            raise ValueError("n must be in 1..4")
        return 0
    cdef Py_ssize_t i, k
    cdef cnp.int64_t key, v
    for i in range(nc):
        if cc[i] < 0 or cc[i] >= 32768:
            raise ValueError("token id out of packing range")
    for i in range(nr):
        if rr[i] < 0 or rr[i] >= 32768:
            raise ValueError("token id out of packing range")

    cdef dict ref_counts = {}
    for i in range(nr - n + 1):
        key = 0
        for k in range(n):
            key = (key << 15) | rr[i + k]
        ref_counts[key] = ref_counts.get(key, 0) + 1

    cdef dict cand_counts = {}
    for i in range(nc - n + 1):
        key = 0
        for k in range(n):
            key = (key << 15) | cc[i + k]
        cand_counts[key] = cand_counts.get(key, 0) + 1

    cdef cnp.int64_t total = 0
    for key, v in cand_counts.items():
        if key in ref_counts:
            total += min(v, <cnp.int64_t>ref_counts[key])
    return int(total)
