"""Representation models (word tokens, character n-grams, optional multiset
counters) and the normalized set-similarity measures."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import AbstractSet

from .core import ConfigError

# separates a token from its occurrence counter in multiset mode; the counter is
# always the text after the last separator, so decoding is unambiguous
COUNTER_SEP = "#"


class ReprKind(enum.Enum):
    WORD = "T"
    CHAR = "C"


@dataclass(frozen=True)
class ReprModel:
    kind: ReprKind = ReprKind.WORD
    n: int = 1
    multiset: bool = False

    def __post_init__(self):
        if self.kind is ReprKind.WORD and self.n != 1:
            raise ConfigError("word-token models have n = 1")
        if self.kind is ReprKind.CHAR and self.n not in (2, 3, 4, 5):
            raise ConfigError(f"character n-gram size must be in 2..5, got {self.n}")

    @property
    def code(self) -> str:
        return f"{self.kind.value}{self.n}G" + ("M" if self.multiset else "")

    def __str__(self) -> str:
        return self.code

    @classmethod
    def parse(cls, code: str) -> "ReprModel":
        """Parse a model code such as ``T1G``, ``T1GM``, ``C3G`` or ``C5GM``."""
        m = re.fullmatch(r"([TC])([1-5])G(M?)", code.strip().upper())
        if not m:
            raise ConfigError(f"unknown representation model {code!r}")
        kind = ReprKind(m.group(1))
        return cls(kind, int(m.group(2)), bool(m.group(3)))


ALL_MODELS = tuple(
    ReprModel.parse(c)
    for c in ("T1G", "T1GM", "C2G", "C2GM", "C3G", "C3GM", "C4G", "C4GM", "C5G", "C5GM")
)


@dataclass(frozen=True)
class TokenRecord:
    id: str
    tokens: frozenset[str]

    def __len__(self) -> int:
        return len(self.tokens)


def char_ngrams(text: str, n: int) -> list[str]:
    """Overlapping n-grams of the whole string; a non-empty string shorter than
    ``n`` yields itself."""
    if not text:
        return []
    if len(text) < n:
        return [text]
    return [text[i:i + n] for i in range(len(text) - n + 1)]


def raw_tokens(text: str, model: ReprModel) -> list[str]:
    if model.kind is ReprKind.WORD:
        return text.split()
    return char_ngrams(text, model.n)


def tokenize(text: str, model: ReprModel, entity_id: str = "") -> TokenRecord:
    toks = raw_tokens(text, model)
    if model.multiset:
        seen: dict[str, int] = {}
        out = []
        for t in toks:
            seen[t] = seen.get(t, 0) + 1
            out.append(f"{t}{COUNTER_SEP}{seen[t]}")
        return TokenRecord(entity_id, frozenset(out))
    return TokenRecord(entity_id, frozenset(toks))


def strip_counters(tokens: AbstractSet[str]) -> set[str]:
    return {t.rsplit(COUNTER_SEP, 1)[0] for t in tokens}


class Measure(enum.Enum):
    COSINE = "cosine"
    DICE = "dice"
    JACCARD = "jaccard"

    @classmethod
    def parse(cls, name: str) -> "Measure":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown similarity measure {name!r}") from None


def similarity_from_overlap(measure: Measure, overlap: int, size_a: int, size_b: int) -> float:
    if overlap <= 0 or size_a <= 0 or size_b <= 0:
        return 0.0
    if measure is Measure.COSINE:
        return overlap / math.sqrt(size_a * size_b)
    if measure is Measure.DICE:
        return 2.0 * overlap / (size_a + size_b)
    return overlap / (size_a + size_b - overlap)


def cosine(a: AbstractSet, b: AbstractSet) -> float:
    return similarity_from_overlap(Measure.COSINE, len(a & b), len(a), len(b))


def dice(a: AbstractSet, b: AbstractSet) -> float:
    return similarity_from_overlap(Measure.DICE, len(a & b), len(a), len(b))


def jaccard(a: AbstractSet, b: AbstractSet) -> float:
    return similarity_from_overlap(Measure.JACCARD, len(a & b), len(a), len(b))


MEASURES = {Measure.COSINE: cosine, Measure.DICE: dice, Measure.JACCARD: jaccard}
