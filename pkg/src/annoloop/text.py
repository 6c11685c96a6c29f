"""Text normalization, token-overlap F1 and n-gram extraction.

Every module that compares or filters text goes through these functions, so
the rules here are the single source of truth: lowercase, strip punctuation,
drop the English articles a/an/the, split on whitespace.
"""

from __future__ import annotations

import sys
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import PreconditionError

_ARTICLES = frozenset({"a", "an", "the"})

# Unicode general categories P* (all punctuation), precomputed once.
_PUNCT_TABLE = {
    cp: None
    for cp in range(sys.maxunicode + 1)
    if unicodedata.category(chr(cp)).startswith("P")
}


@dataclass(frozen=True)
class F1Score:
    """Harmonic mean of token precision and recall, with its components."""

    value: float
    precision: float
    recall: float


def normalize(text: str) -> list[str]:
    """Normalize raw text to a token list.

    Idempotent: normalizing the space-joined output returns the same tokens.
    """
    stripped = text.lower().translate(_PUNCT_TABLE)
    return [tok for tok in stripped.split() if tok not in _ARTICLES]


def f1_overlap(prediction: str, gold: str) -> F1Score:
    """Word-overlap F1 between two raw strings, on normalized token bags.

    Both sides empty after normalization scores 1.0; exactly one empty
    scores 0.0.
    """
    pred = Counter(normalize(prediction))
    ref = Counter(normalize(gold))
    if not pred and not ref:
        return F1Score(1.0, 1.0, 1.0)
    if not pred or not ref:
        return F1Score(0.0, 0.0, 0.0)
    overlap = sum((pred & ref).values())
    if overlap == 0:
        return F1Score(0.0, 0.0, 0.0)
    m, n = sum(pred.values()), sum(ref.values())
    precision = overlap / m
    recall = overlap / n
    # algebraically 2pr/(p+r); the single division keeps the float exact
    value = 2 * overlap / (m + n)
    return F1Score(value, precision, recall)


def max_f1_over_golds(prediction: str, golds: Sequence[str]) -> F1Score:
    """Best f1_overlap of `prediction` against any gold, first-wins on ties."""
    if not golds:
        raise PreconditionError("max_f1_over_golds requires at least one gold")
    best = f1_overlap(prediction, golds[0])
    for gold in golds[1:]:
        score = f1_overlap(prediction, gold)
        if score.value > best.value:
            best = score
    return best


def ngrams(tokens: Iterable[str], n: int) -> set[tuple[str, ...]]:
    """All contiguous n-token windows, as a set of tuples."""
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")
    toks = list(tokens)
    return {tuple(toks[i : i + n]) for i in range(len(toks) - n + 1)}
