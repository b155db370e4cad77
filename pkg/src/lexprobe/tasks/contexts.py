"""Context sentences: indexing a corpus by phrase and attaching sentences to items.

The corpus file is one pre-split sentence per line. Only sentences of 15-20
tokens are indexed, and a sentence is a candidate for a phrase when the
phrase's tokens appear contiguously (case-insensitively; the sentence's
surface forms are what get stored).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .base import item_rng, tokenize

MIN_CONTEXT_TOKENS = 15
MAX_CONTEXT_TOKENS = 20


def find_phrase(sentence: list[str], phrase: list[str]) -> int | None:
    """Index of the first contiguous, case-insensitive occurrence, else None."""
    if not phrase or len(phrase) > len(sentence):
        return None
    lowered = [t.lower() for t in sentence]
    target = [t.lower() for t in phrase]
    for start in range(len(sentence) - len(phrase) + 1):
        if lowered[start:start + len(phrase)] == target:
            return start
    return None


class ContextIndex:
    """Map from phrase to the corpus sentences eligible to host it."""

    def __init__(self):
        self._candidates: dict[tuple[str, ...], list[list[str]]] = {}

    @staticmethod
    def _key(phrase: list[str]) -> tuple[str, ...]:
        return tuple(t.lower() for t in phrase)

    def add(self, phrase: list[str], sentence: list[str]) -> None:
        if not (MIN_CONTEXT_TOKENS <= len(sentence) <= MAX_CONTEXT_TOKENS):
            raise ValueError(f"sentence of {len(sentence)} tokens outside 15-20 band")
        if find_phrase(sentence, phrase) is None:
            raise ValueError(f"sentence does not contain phrase {phrase}")
        stored = self._candidates.setdefault(self._key(phrase), [])
        if sentence not in stored:  # keep candidates distinct
            stored.append(sentence)

    def candidates(self, phrase: list[str]) -> list[list[str]]:
        return self._candidates.get(self._key(phrase), [])

    def __len__(self) -> int:
        return len(self._candidates)


def build_context_index(corpus_path: str, phrases: Iterable[list[str]]) -> ContextIndex:
    """One corpus scan collecting 15-20 token sentences for each phrase."""
    keys = {ContextIndex._key(p): list(p) for p in phrases}
    index = ContextIndex()
    with open(corpus_path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            sentence = tokenize(line)
            if not (MIN_CONTEXT_TOKENS <= len(sentence) <= MAX_CONTEXT_TOKENS):
                continue
            for key, phrase in keys.items():
                if find_phrase(sentence, phrase) is not None:
                    index.add(phrase, sentence)
    return index


@dataclass
class ContextItem:
    """A phrase-bearing item awaiting context sentences."""

    id: str
    phrase: list[str]
    payload: dict


@dataclass
class AttachedContext:
    item: ContextItem
    sentence: list[str]
    span: tuple[int, int]  # phrase occurrence, inclusive endpoints


def attach_contexts(
    items: list[ContextItem],
    index: ContextIndex,
    per_item_limit: int,
    seed: int,
) -> tuple[list[AttachedContext], list[str]]:
    """Give each item up to per_item_limit distinct context sentences.

    Selection is seeded-uniform without replacement, randomized per item from
    (seed, item id) so the outcome doesn't depend on processing order. Items
    with no eligible sentence are dropped; their ids are returned for the
    build report.
    """
    attached: list[AttachedContext] = []
    dropped: list[str] = []
    for item in items:
        candidates = index.candidates(item.phrase)
        if not candidates:
            dropped.append(item.id)
            continue
        take = min(per_item_limit, len(candidates))
        rng = item_rng(seed, item.id)
        chosen = sorted(rng.choice(len(candidates), size=take, replace=False).tolist())
        for pick in chosen:
            sentence = candidates[pick]
            start = find_phrase(sentence, item.phrase)
            span = (start, start + len(item.phrase) - 1)
            attached.append(AttachedContext(item=item, sentence=sentence, span=span))
    return attached, dropped
