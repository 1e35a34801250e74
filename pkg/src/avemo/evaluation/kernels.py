"""Backend selection for the text-metric kernels.

Prefers the compiled extension, falls back to pure Python. Set
``AVEMO_TEXT_KERNELS=python`` to force the fallback (used by tests and
the backend-comparison benchmark).
"""

import os

if os.environ.get("AVEMO_TEXT_KERNELS", "").lower() == "python":
    from avemo.evaluation import _ngram_py as _impl

    BACKEND = "python"
else:
    try:
        from avemo.evaluation import _ngram_cy as _impl

        BACKEND = "cython"
    except ImportError:
        from avemo.evaluation import _ngram_py as _impl

        BACKEND = "python"

lcs_length = _impl.lcs_length
clipped_matches = _impl.clipped_matches

__all__ = ["BACKEND", "lcs_length", "clipped_matches"]
