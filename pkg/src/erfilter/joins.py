"""Set-similarity joins over token sets (ScanCount-based epsilon and kNN joins)
and the edit-distance join with a length-dependent threshold."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ConfigError, PairArray
from .representation import Measure, ReprModel

# similarities within this distance below a threshold still satisfy it
SIM_EPS = 1e-12


def meets_threshold(sim, t: float):
    return sim >= t - SIM_EPS


class JoinMode(enum.Enum):
    EPSILON = "epsilon"
    KNN = "knn"


@dataclass
class JoinDiagnostics:
    empty_indexed: int = 0
    empty_queries: int = 0


class InvertedIndex:
    """Token -> posting array of record indices, plus per-record set sizes."""

    def __init__(self, records: Sequence[frozenset[str]]):
        postings: dict[str, list[int]] = {}
        for idx, toks in enumerate(records):
            for tok in toks:
                postings.setdefault(tok, []).append(idx)
        self.postings = {tok: np.asarray(ids, dtype=np.int64) for tok, ids in postings.items()}
        self.sizes = np.array([len(r) for r in records], dtype=np.int64)
        self.n = len(records)

    def __len__(self) -> int:
        return self.n

    def overlaps(self, query: frozenset[str]) -> np.ndarray:
        """ScanCount: merge-count the posting lists of every query token."""
        lists = [self.postings[t] for t in query if t in self.postings]
        if not lists:
            return np.zeros(self.n, dtype=np.int64)
        return np.bincount(np.concatenate(lists), minlength=self.n)


def similarities(measure: Measure, overlap: np.ndarray, size_q: int, sizes: np.ndarray) -> np.ndarray:
    o = overlap.astype(np.float64)
    b = sizes.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        if measure is Measure.COSINE:
            sim = o / np.sqrt(float(size_q) * b)
        elif measure is Measure.DICE:
            sim = 2.0 * o / (float(size_q) + b)
        else:
            sim = o / (float(size_q) + b - o)
    return np.where(overlap > 0, sim, 0.0)


def scan_count(index: InvertedIndex, query: frozenset[str], measure: Measure, t: float):
    """Indexed records whose similarity to ``query`` is at least ``t``.

    Only records sharing a token with the query are reachable, so ``t = 0``
    returns every overlapping record. Returns (indices, similarities).
    """
    if not query:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    ov = index.overlaps(query)
    hit = np.flatnonzero(ov)
    sims = similarities(measure, ov[hit], len(query), index.sizes[hit])
    keep = meets_threshold(sims, t)
    return hit[keep], sims[keep]


def top_k_distinct(sims: np.ndarray, k: int) -> np.ndarray:
    """Mask of entries whose value is among the k largest distinct positive values."""
    pos = sims > 0
    if not pos.any():
        return pos
    distinct = np.unique(sims[pos])[::-1]
    cutoff = distinct[min(k, distinct.size) - 1]
    return pos & (sims >= cutoff)


def _pairs(indexed_is_left: bool, q_idx: int, hits: np.ndarray):
    if indexed_is_left:
        return hits, np.full(hits.size, q_idx, dtype=np.int64)
    return np.full(hits.size, q_idx, dtype=np.int64), hits


def epsilon_join(left: Sequence[frozenset[str]], right: Sequence[frozenset[str]],
                 measure: Measure, t: float, diagnostics: JoinDiagnostics | None = None) -> PairArray:
    """All (left, right) pairs with similarity >= t. E1 is indexed, E2 queries."""
    if not 0.0 <= t <= 1.0:
        raise ConfigError(f"similarity threshold must be in [0, 1], got {t}")
    index = InvertedIndex(left)
    rows, cols = [], []
    for q_idx, query in enumerate(right):
        hits, _ = scan_count(index, query, measure, t)
        r, c = _pairs(True, q_idx, hits)
        rows.append(r)
        cols.append(c)
    if diagnostics is not None:
        diagnostics.empty_indexed = int((index.sizes == 0).sum())
        diagnostics.empty_queries = sum(1 for q in right if not q)
    return _assemble(rows, cols, len(left), len(right))


def knn_join(left: Sequence[frozenset[str]], right: Sequence[frozenset[str]],
             measure: Measure, k: int, reverse: bool = False,
             diagnostics: JoinDiagnostics | None = None) -> PairArray:
    """Pair each query with the indexed records holding its k highest distinct
    similarity values (ties included).

    By default E1 is indexed and E2 supplies the queries; ``reverse`` indexes E2
    and queries with E1. Pairs are always returned as (E1, E2).
    """
    if k < 1:
        raise ConfigError(f"K must be >= 1, got {k}")
    indexed, queries = (right, left) if reverse else (left, right)
    index = InvertedIndex(indexed)
    rows, cols = [], []
    for q_idx, query in enumerate(queries):
        if not query:
            continue
        ov = index.overlaps(query)
        hit = np.flatnonzero(ov)
        if hit.size == 0:
            continue
        sims = similarities(measure, ov[hit], len(query), index.sizes[hit])
        chosen = hit[top_k_distinct(sims, k)]
        r, c = _pairs(not reverse, q_idx, chosen)
        rows.append(r)
        cols.append(c)
    if diagnostics is not None:
        diagnostics.empty_indexed = int((index.sizes == 0).sum())
        diagnostics.empty_queries = sum(1 for q in queries if not q)
    return _assemble(rows, cols, len(left), len(right))


def _assemble(rows, cols, n_left, n_right) -> PairArray:
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
    else:
        r = c = np.zeros(0, dtype=np.int64)
    return PairArray.from_codes(r * n_right + c, n_left, n_right)


# -- edit distance -----------------------------------------------------------


def edit_distance(s1: str, s2: str, cap: int | None = None) -> int:
    """Levenshtein distance. With ``cap``, any distance above it is reported as
    ``cap + 1`` and only a diagonal band of width 2*cap+1 is computed."""
    if len(s1) < len(s2):
        s1, s2 = s2, s1
    n, m = len(s1), len(s2)
    if cap is not None and n - m > cap:
        return cap + 1
    if m == 0:
        return n if cap is None else min(n, cap + 1)
    big = n + m + 1
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        if cap is None:
            lo, hi = 1, m
        else:
            lo, hi = max(1, i - cap), min(m, i + cap)
        cur = [big] * (m + 1)
        cur[0] = i if (cap is None or i <= cap) else big
        c1 = s1[i - 1]
        for j in range(lo, hi + 1):
            cost = 0 if c1 == s2[j - 1] else 1
            v = prev[j - 1] + cost
            if prev[j] + 1 < v:
                v = prev[j] + 1
            if cur[j - 1] + 1 < v:
                v = cur[j - 1] + 1
            cur[j] = v
        if cap is not None and min(cur[max(0, lo - 1):hi + 1]) > cap:
            return cap + 1
        prev = cur
    d = prev[m]
    if cap is not None and d > cap:
        return cap + 1
    return d


def within_dynamic_threshold(distance: int, len1: int, len2: int) -> bool:
    """Match iff the distance is below half the shorter string's length."""
    return 2 * distance < min(len1, len2)


_HIST_BUCKETS = 64


def _char_histograms(texts: Sequence[str]) -> np.ndarray:
    out = np.zeros((len(texts), _HIST_BUCKETS), dtype=np.int32)
    for i, s in enumerate(texts):
        for ch in s:
            out[i, ord(ch) % _HIST_BUCKETS] += 1
    return out


def edit_join(left: Sequence[str], right: Sequence[str]) -> PairArray:
    """Pairs of non-empty strings whose edit distance is below half the length
    of the shorter one.

    Candidates are pruned by length and by a character-histogram lower bound
    before the banded distance computation verifies them.
    """
    right_len = np.array([len(s) for s in right], dtype=np.int64)
    right_hist = _char_histograms(right)
    rows, cols = [], []
    for i, a in enumerate(left):
        la = len(a)
        if la == 0:
            continue
        m = np.minimum(la, right_len)
        # 2*|la - lb| < min(la, lb) is necessary since d >= |la - lb|
        ok = (right_len > 0) & (2 * np.abs(right_len - la) < m)
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            continue
        ha = _char_histograms([a])[0]
        diff = right_hist[cand] - ha
        lower = np.maximum(np.clip(diff, 0, None).sum(axis=1), np.clip(-diff, 0, None).sum(axis=1))
        cand = cand[2 * lower < m[cand]]
        for j in cand.tolist():
            b = right[j]
            cap = (min(la, len(b)) - 1) // 2
            d = edit_distance(a, b, cap)
            if within_dynamic_threshold(d, la, len(b)):
                rows.append(i)
                cols.append(j)
    return PairArray.from_pairs(zip(rows, cols), len(left), len(right))


@dataclass(frozen=True)
class JoinConfig:
    cleaning: bool = False
    measure: Measure = Measure.COSINE
    model: ReprModel = field(default_factory=ReprModel)
    mode: JoinMode = JoinMode.EPSILON
    t: float | None = None
    k: int | None = None
    reverse: bool = False

    def __post_init__(self):
        if self.mode is JoinMode.EPSILON:
            if self.t is None or not 0.0 <= self.t <= 1.0:
                raise ConfigError(f"similarity threshold t must be in [0, 1], got {self.t}")
        else:
            if self.k is None or not 1 <= self.k <= 100:
                raise ConfigError(f"K must be in [1, 100], got {self.k}")
