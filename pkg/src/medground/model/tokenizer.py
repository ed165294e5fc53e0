"""Minimal word-level tokenizer over a fixed vocabulary.

Lowercase, strip punctuation, split on whitespace, map through the vocab
with an unknown-token id. Sequences are truncated or padded to a fixed
length with an attention mask.
"""

from __future__ import annotations

import re

PAD_ID = 0
UNK_ID = 1
RESERVED = 2  # PAD and UNK occupy ids 0 and 1

_NON_WORD = re.compile(r"[^a-z0-9]+")


class EmptyTextError(ValueError):
    """Text that tokenizes to all padding."""


def normalize_words(text: str) -> list[str]:
    return [w for w in _NON_WORD.sub(" ", text.lower()).split() if w]


def build_vocab(texts) -> dict[str, int]:
    """Assign ids (from 2 upward) to the sorted unique words of ``texts``."""
    words = sorted({w for text in texts for w in normalize_words(text)})
    return {w: i + RESERVED for i, w in enumerate(words)}


def tokenize(text: str, vocab: dict[str, int], max_len: int) -> tuple[list[int], list[int]]:
    """Return (token ids, attention mask), both of length ``max_len``."""
    words = normalize_words(text)[:max_len]
    ids = [vocab.get(w, UNK_ID) for w in words]
    mask = [1] * len(ids)
    pad = max_len - len(ids)
    return ids + [PAD_ID] * pad, mask + [0] * pad


def tokenize_checked(text: str, vocab: dict[str, int], max_len: int) -> tuple[list[int], list[int]]:
    ids, mask = tokenize(text, vocab, max_len)
    if not any(mask):
        raise EmptyTextError(f"text {text!r} tokenizes to all padding")
    return ids, mask


def vocab_coverage(texts, vocab: dict[str, int]) -> float:
    """Fraction of word occurrences in ``texts`` that are in-vocabulary."""
    total = 0
    known = 0
    for text in texts:
        for w in normalize_words(text):
            total += 1
            known += 1 if w in vocab else 0
    return known / total if total else 1.0
