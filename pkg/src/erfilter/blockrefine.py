"""Block cleaning (Purging, Filtering) and comparison cleaning (Comparison
Propagation, Meta-blocking), composed into the blocking workflow."""

from __future__ import annotations

import enum
import math
import time
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .blockbuild import Block, BlockBuildConfig, BlockCollection, BuildMethod, build_blocks
from .core import ConfigError, PairArray

# tolerance for threshold comparisons; weights reaching a threshold up to
# rounding noise are retained
_REL_EPS = 1e-9


class WeightScheme(enum.Enum):
    ARCS = "ARCS"
    CBS = "CBS"
    ECBS = "ECBS"
    JS = "JS"
    EJS = "EJS"
    CHI2 = "CHI2"

    @classmethod
    def parse(cls, name: str) -> "WeightScheme":
        key = name.strip().upper().replace("Χ", "CHI").replace("^", "")
        if key in ("CHISQ", "CHI2", "X2", "CHI-SQUARE"):
            key = "CHI2"
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown weighting scheme {name!r}") from None


class PruneAlgo(enum.Enum):
    BLAST = "BLAST"
    CEP = "CEP"
    CNP = "CNP"
    RCNP = "RCNP"
    RWNP = "RWNP"
    WEP = "WEP"
    WNP = "WNP"

    @classmethod
    def parse(cls, name: str) -> "PruneAlgo":
        try:
            return cls(name.strip().upper())
        except ValueError:
            raise ConfigError(f"unknown pruning algorithm {name!r}") from None


@dataclass(frozen=True)
class RefineConfig:
    """Block/comparison cleaning settings. ``scheme``/``algo`` both None means
    Comparison Propagation; both set means Meta-blocking."""

    purge: bool = False
    filter_ratio: float | None = None
    scheme: WeightScheme | None = None
    algo: PruneAlgo | None = None

    def __post_init__(self):
        r = self.filter_ratio
        if r is not None and not 0.025 - 1e-9 <= r <= 1.0 + 1e-9:
            raise ConfigError(f"filter ratio must be in [0.025, 1.0], got {r}")
        if (self.scheme is None) != (self.algo is None):
            raise ConfigError("meta-blocking needs both a weighting scheme and a pruning algorithm")

    @property
    def filtering(self) -> bool:
        return self.filter_ratio is not None and self.filter_ratio < 1.0 - 1e-9

    @property
    def metablocking(self) -> bool:
        return self.scheme is not None

    def params(self) -> dict:
        return {
            "BP": self.purge,
            "BFr": 1.0 if self.filter_ratio is None else self.filter_ratio,
            "PA": self.algo.value if self.algo else "CP",
            "WS": self.scheme.value if self.scheme else None,
        }


# -- block cleaning ---------------------------------------------------------


def purge_threshold(bc: BlockCollection) -> float:
    return 0.5 * min(bc.n_left, bc.n_right)


def block_purging(bc: BlockCollection) -> BlockCollection:
    """Drop every block holding more than half of the smaller input's entity count."""
    limit = purge_threshold(bc)
    kept = tuple(b for b in bc.blocks if b.entities <= limit)
    return BlockCollection(kept, bc.n_left, bc.n_right, {**bc.provenance, "purged": True})


def block_filtering(bc: BlockCollection, ratio: float) -> BlockCollection:
    """Keep each entity only in the ceil(ratio * n) smallest of its n blocks.

    Blocks are ranked by comparison count, ties by key.
    """
    if not 0 < ratio <= 1:
        raise ConfigError(f"filter ratio must be in (0, 1], got {ratio}")
    order = sorted(range(len(bc.blocks)), key=lambda b: (bc.blocks[b].comparisons, bc.blocks[b].key))
    rank = {b: r for r, b in enumerate(order)}
    member_of: list[dict[int, list[int]]] = [defaultdict(list), defaultdict(list)]
    for b_idx, blk in enumerate(bc.blocks):
        for i in blk.left:
            member_of[0][i].append(b_idx)
        for j in blk.right:
            member_of[1][j].append(b_idx)
    keep: list[set[int]] = [set(), set()]
    for side in (0, 1):
        for ent, blist in member_of[side].items():
            n_keep = math.ceil(ratio * len(blist) - 1e-9)
            for b_idx in sorted(blist, key=rank.__getitem__)[:n_keep]:
                keep[side].add((ent, b_idx))
    out = []
    for b_idx, blk in enumerate(bc.blocks):
        left = tuple(i for i in blk.left if (i, b_idx) in keep[0])
        right = tuple(j for j in blk.right if (j, b_idx) in keep[1])
        if left and right:
            out.append(Block(blk.key, left, right))
    return BlockCollection(tuple(out), bc.n_left, bc.n_right, {**bc.provenance, "filter_ratio": ratio})


# -- comparison cleaning ----------------------------------------------------


def incidence(bc: BlockCollection) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """Entity-by-block 0/1 matrices for the left and right sides."""
    nb = len(bc.blocks)
    lr, lc, rr, rc = [], [], [], []
    for b_idx, blk in enumerate(bc.blocks):
        lr.extend(blk.left)
        lc.extend([b_idx] * len(blk.left))
        rr.extend(blk.right)
        rc.extend([b_idx] * len(blk.right))
    left = sparse.csr_matrix(
        (np.ones(len(lr), dtype=np.float64), (lr, lc)), shape=(bc.n_left, nb))
    right = sparse.csr_matrix(
        (np.ones(len(rr), dtype=np.float64), (rr, rc)), shape=(bc.n_right, nb))
    return left, right


def comparison_propagation(bc: BlockCollection) -> PairArray:
    """Every distinct cross-side pair that shares at least one block, once."""
    if not bc.blocks:
        return PairArray.from_pairs([], bc.n_left, bc.n_right)
    left, right = incidence(bc)
    co = (left @ right.T).tocoo()
    codes = co.row.astype(np.int64) * bc.n_right + co.col.astype(np.int64)
    return PairArray.from_codes(codes, bc.n_left, bc.n_right)


@dataclass(frozen=True, eq=False)
class WeightedPairs:
    """Non-redundant candidates with one weight each, plus the block statistics
    that the cardinality-based pruning algorithms derive K and k from."""

    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    n_left: int
    n_right: int
    total_assignments: int

    def __len__(self) -> int:
        return int(self.rows.size)


def _log_factor(ratio: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log10(ratio)
    out[~np.isfinite(out)] = 0.0
    return np.maximum(out, 0.0)


# weights are rounded to this many mantissa bits so that mathematically equal
# weights summed in different orders (ARCS) rank as ties
WEIGHT_BITS = 40


def snap(w: np.ndarray) -> np.ndarray:
    m, e = np.frexp(np.asarray(w, dtype=np.float64))
    return np.ldexp(np.round(m * 2.0 ** WEIGHT_BITS) / 2.0 ** WEIGHT_BITS, e)


def weigh(bc: BlockCollection, scheme: WeightScheme) -> WeightedPairs:
    """Weight every non-redundant candidate pair of ``bc``.

    With B the blocks, B_i the blocks of entity i and B_ij = B_i & B_j:
    ARCS sums 1/||b|| over B_ij, CBS = |B_ij|,
    ECBS = CBS * log(|B|/|B_i|) * log(|B|/|B_j|), JS = |B_ij| / |B_i | B_j|,
    EJS = JS * log(|V|/v_i) * log(|V|/v_j) with v_i the candidates of i and |V|
    all candidates, and CHI2 the 2x2 chi-square over block co-occurrence.
    """
    n_blocks = len(bc.blocks)
    if n_blocks == 0:
        empty = np.zeros(0, dtype=np.int64)
        return WeightedPairs(empty, empty, np.zeros(0), bc.n_left, bc.n_right, 0)
    left, right = incidence(bc)
    common = (left @ right.T).tocoo()
    order = np.lexsort((common.col, common.row))
    rows = common.row[order].astype(np.int64)
    cols = common.col[order].astype(np.int64)
    cbs = common.data[order]
    bi = np.asarray(left.sum(axis=1)).ravel()[rows]
    bj = np.asarray(right.sum(axis=1)).ravel()[cols]

    if scheme is WeightScheme.ARCS:
        inv = np.array([1.0 / b.comparisons for b in bc.blocks])
        arcs = (left @ sparse.diags(inv) @ right.T).tocoo()
        w = arcs.data[np.lexsort((arcs.col, arcs.row))]
    elif scheme is WeightScheme.CBS:
        w = cbs.copy()
    elif scheme is WeightScheme.ECBS:
        w = cbs * _log_factor(n_blocks / bi) * _log_factor(n_blocks / bj)
    elif scheme is WeightScheme.JS:
        w = cbs / (bi + bj - cbs)
    elif scheme is WeightScheme.EJS:
        n_pairs = rows.size
        vi = np.bincount(rows, minlength=bc.n_left)[rows].astype(np.float64)
        vj = np.bincount(cols, minlength=bc.n_right)[cols].astype(np.float64)
        w = cbs / (bi + bj - cbs) * _log_factor(n_pairs / vi) * _log_factor(n_pairs / vj)
    else:
        w = chi_square(cbs, bi, bj, n_blocks)
    return WeightedPairs(rows, cols, snap(w), bc.n_left, bc.n_right,
                         bc.total_assignments)


def chi_square(n11, bi, bj, n_blocks):
    n11 = np.asarray(n11, dtype=np.float64)
    n12 = bi - n11
    n21 = bj - n11
    n22 = n_blocks - bi - bj + n11
    num = n_blocks * (n11 * n22 - n12 * n21) ** 2
    den = (n11 + n12) * (n21 + n22) * (n11 + n21) * (n12 + n22)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return out


def cep_budget(wp: WeightedPairs) -> int:
    return wp.total_assignments // 2


def cnp_budget(wp: WeightedPairs) -> int:
    return max(1, wp.total_assignments // (wp.n_left + wp.n_right))


def _at_least(w: np.ndarray, threshold) -> np.ndarray:
    threshold = np.asarray(threshold, dtype=np.float64)
    return w >= threshold - _REL_EPS * np.maximum(1.0, np.abs(threshold))


def _group_mean(keys: np.ndarray, w: np.ndarray, n: int) -> np.ndarray:
    sums = np.bincount(keys, weights=w, minlength=n)
    counts = np.bincount(keys, minlength=n)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)


def _group_max(keys: np.ndarray, w: np.ndarray, n: int) -> np.ndarray:
    out = np.full(n, -np.inf)
    np.maximum.at(out, keys, w)
    return out


def _ranks(keys: np.ndarray, other: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Position of each edge within its key's list ordered by (-weight, other index)."""
    order = np.lexsort((other, -w, keys))
    sorted_keys = keys[order]
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_keys)) + 1]
    group_start = np.repeat(starts, np.diff(np.r_[starts, sorted_keys.size]))
    ranks = np.empty_like(order)
    ranks[order] = np.arange(order.size) - group_start
    return ranks


def prune(wp: WeightedPairs, algo: PruneAlgo) -> PairArray:
    rows, cols, w = wp.rows, wp.cols, wp.weights
    if rows.size == 0:
        return PairArray(rows, cols, wp.n_left, wp.n_right)
    if algo is PruneAlgo.WEP:
        keep = _at_least(w, float(np.mean(w)))
    elif algo in (PruneAlgo.WNP, PruneAlgo.RWNP):
        left_ok = _at_least(w, _group_mean(rows, w, wp.n_left)[rows])
        right_ok = _at_least(w, _group_mean(cols, w, wp.n_right)[cols])
        keep = left_ok | right_ok if algo is PruneAlgo.WNP else left_ok & right_ok
    elif algo is PruneAlgo.BLAST:
        thr = 0.5 * (_group_max(rows, w, wp.n_left)[rows] + _group_max(cols, w, wp.n_right)[cols])
        keep = _at_least(w, thr)
    elif algo in (PruneAlgo.CNP, PruneAlgo.RCNP):
        k = cnp_budget(wp)
        left_ok = _ranks(rows, cols, w) < k
        right_ok = _ranks(cols, rows, w) < k
        keep = left_ok | right_ok if algo is PruneAlgo.CNP else left_ok & right_ok
    else:
        budget = cep_budget(wp)
        order = np.lexsort((cols, rows, -w))
        keep = np.zeros(rows.size, dtype=bool)
        keep[order[:budget]] = True
    return PairArray(rows[keep], cols[keep], wp.n_left, wp.n_right)


def metablocking(bc: BlockCollection, scheme: WeightScheme, algo: PruneAlgo) -> PairArray:
    return prune(weigh(bc, scheme), algo)


# -- workflow ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WorkflowResult:
    pairs: PairArray
    blocks: BlockCollection
    timings: dict[str, float]


def refine_blocks(bc: BlockCollection, refine: RefineConfig, timings: dict | None = None) -> BlockCollection:
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    if refine.purge:
        bc = block_purging(bc)
    t1 = time.perf_counter()
    if refine.filtering:
        bc = block_filtering(bc, refine.filter_ratio)
    t2 = time.perf_counter()
    timings["t_p"] = t1 - t0 if refine.purge else 0.0
    timings["t_f"] = t2 - t1 if refine.filtering else 0.0
    return bc


def clean_comparisons(bc: BlockCollection, refine: RefineConfig) -> PairArray:
    if refine.metablocking:
        return metablocking(bc, refine.scheme, refine.algo)
    return comparison_propagation(bc)


def run_blocking_workflow(left_texts, right_texts, build: BlockBuildConfig,
                          refine: RefineConfig) -> WorkflowResult:
    """Build -> optional purge -> optional filter -> comparison cleaning, timing
    each stage as t_b, t_p, t_f, t_c."""
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    bc = build_blocks(left_texts, right_texts, build)
    timings["t_b"] = time.perf_counter() - t0
    bc = refine_blocks(bc, refine, timings)
    t0 = time.perf_counter()
    pairs = clean_comparisons(bc, refine)
    timings["t_c"] = time.perf_counter() - t0
    return WorkflowResult(pairs, bc, timings)


PBW_BUILD = BlockBuildConfig()
PBW_REFINE = RefineConfig(purge=True)
DBW_BUILD = BlockBuildConfig(BuildMethod.QGRAMS, q=6)
DBW_REFINE = RefineConfig(filter_ratio=0.5, scheme=WeightScheme.ECBS, algo=PruneAlgo.WEP)
