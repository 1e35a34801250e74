"""Metric tokenizer, pinned and versioned.

Lowercases, then splits into word tokens (letters, digits, apostrophes)
and single punctuation-mark tokens. Version bumps whenever the rule
changes so stored reports stay comparable.
"""

import re

METRIC_TOKENIZER_VERSION = 1

_TOKEN_RE = re.compile(r"[a-z0-9']+|[^\sa-z0-9']")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())
