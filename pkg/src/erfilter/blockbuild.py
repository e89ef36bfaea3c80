"""Signature-based block building: Standard, (Extended) Q-Grams and (Extended)
Suffix Arrays Blocking."""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

from .core import ConfigError

EQ_SEPARATOR = "_"
# Extended Q-Grams enumerates combinations of a token's q-grams; beyond this many
# grams per token the count explodes, so only the leading ones are combined
MAX_EXTENDED_QGRAMS = 15


class BuildMethod(enum.Enum):
    STANDARD = "standard"
    QGRAMS = "qgrams"
    EXTENDED_QGRAMS = "extended-qgrams"
    SUFFIX_ARRAYS = "suffix-arrays"
    EXTENDED_SUFFIX_ARRAYS = "extended-suffix-arrays"

    @property
    def proactive(self) -> bool:
        return self in (BuildMethod.SUFFIX_ARRAYS, BuildMethod.EXTENDED_SUFFIX_ARRAYS)


@dataclass(frozen=True)
class BlockBuildConfig:
    method: BuildMethod = BuildMethod.STANDARD
    q: int | None = None
    t: float | None = None
    l_min: int | None = None
    b_max: int | None = None

    def __post_init__(self):
        m = self.method
        if m in (BuildMethod.QGRAMS, BuildMethod.EXTENDED_QGRAMS):
            if self.q is None or not 2 <= self.q <= 6:
                raise ConfigError(f"q must be in [2, 6], got {self.q}")
        if m is BuildMethod.EXTENDED_QGRAMS:
            if self.t is None or not 0.8 - 1e-9 <= self.t < 1.0:
                raise ConfigError(f"t must be in [0.8, 1.0), got {self.t}")
        if m.proactive:
            if self.l_min is None or not 2 <= self.l_min <= 6:
                raise ConfigError(f"l_min must be in [2, 6], got {self.l_min}")
            if self.b_max is None or not 2 <= self.b_max <= 100:
                raise ConfigError(f"b_max must be in [2, 100], got {self.b_max}")

    def params(self) -> dict:
        out = {}
        for name in ("q", "t", "l_min", "b_max"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        return out


@dataclass(frozen=True)
class Block:
    """A signature with the E1 (left) and E2 (right) entity indices sharing it."""

    key: str
    left: tuple[int, ...]
    right: tuple[int, ...]

    @property
    def comparisons(self) -> int:
        return len(self.left) * len(self.right)

    @property
    def entities(self) -> int:
        return len(self.left) + len(self.right)

    def is_empty(self) -> bool:
        return not self.left or not self.right


@dataclass(frozen=True)
class BlockCollection:
    blocks: tuple[Block, ...]
    n_left: int
    n_right: int
    provenance: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    @property
    def total_comparisons(self) -> int:
        return sum(b.comparisons for b in self.blocks)

    @property
    def total_assignments(self) -> int:
        return sum(b.entities for b in self.blocks)

    def pairs(self) -> set[tuple[int, int]]:
        """Distinct (left, right) index pairs co-occurring in some block."""
        out = set()
        for b in self.blocks:
            for i in b.left:
                for j in b.right:
                    out.add((i, j))
        return out


# -- signature extraction ---------------------------------------------------


def keys_standard(text: str) -> set[str]:
    return set(text.split())


def _token_qgrams(token: str, q: int) -> list[str]:
    if len(token) <= q:
        return [token]
    return [token[i:i + q] for i in range(len(token) - q + 1)]


def keys_qgrams(text: str, q: int) -> set[str]:
    out: set[str] = set()
    for tok in text.split():
        out.update(_token_qgrams(tok, q))
    return out


def keys_extended_qgrams(text: str, q: int, t: float) -> set[str]:
    """Concatenations of at least max(1, floor(k*t)) of each token's k q-grams,
    in left-to-right order."""
    out: set[str] = set()
    for tok in text.split():
        grams = _token_qgrams(tok, q)[:MAX_EXTENDED_QGRAMS]
        k = len(grams)
        if k == 1:
            out.add(grams[0])
            continue
        min_len = max(1, math.floor(k * t + 1e-9))
        for size in range(min_len, k + 1):
            for combo in combinations(grams, size):
                out.add(EQ_SEPARATOR.join(combo))
    return out


def keys_suffix(text: str, l_min: int) -> set[str]:
    out: set[str] = set()
    for tok in text.split():
        for i in range(0, len(tok) - l_min + 1):
            out.add(tok[i:])
    return out


def keys_extended_suffix(text: str, l_min: int) -> set[str]:
    out: set[str] = set()
    for tok in text.split():
        n = len(tok)
        for length in range(l_min, n + 1):
            for i in range(0, n - length + 1):
                out.add(tok[i:i + length])
    return out


def key_function(cfg: BlockBuildConfig) -> Callable[[str], set[str]]:
    m = cfg.method
    if m is BuildMethod.STANDARD:
        return keys_standard
    if m is BuildMethod.QGRAMS:
        return lambda s: keys_qgrams(s, cfg.q)
    if m is BuildMethod.EXTENDED_QGRAMS:
        return lambda s: keys_extended_qgrams(s, cfg.q, cfg.t)
    if m is BuildMethod.SUFFIX_ARRAYS:
        return lambda s: keys_suffix(s, cfg.l_min)
    return lambda s: keys_extended_suffix(s, cfg.l_min)


def build_blocks(
    left_texts: Sequence[str], right_texts: Sequence[str], cfg: BlockBuildConfig
) -> BlockCollection:
    """One block per signature shared by both sides.

    For the suffix methods a block survives only if it holds at most ``b_max``
    distinct entities across both sides.
    """
    keys = key_function(cfg)
    index: dict[str, tuple[list[int], list[int]]] = defaultdict(lambda: ([], []))
    for side, texts in ((0, left_texts), (1, right_texts)):
        for idx, text in enumerate(texts):
            for k in keys(text):
                if k:
                    index[k][side].append(idx)
    blocks = []
    for key in sorted(index):
        left, right = index[key]
        if not left or not right:
            continue
        if cfg.method.proactive and len(left) + len(right) > cfg.b_max:
            continue
        blocks.append(Block(key, tuple(left), tuple(right)))
    return BlockCollection(
        tuple(blocks), len(left_texts), len(right_texts),
        {"builder": cfg.method.value, **cfg.params()},
    )
