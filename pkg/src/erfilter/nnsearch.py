"""Nearest-neighbour style filters: MinHash LSH over character shingles, exact
flat kNN over dense vectors, and Hyperplane / Cross-Polytope LSH with
multi-probe querying."""

from __future__ import annotations

import enum
import hashlib
import heapq
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConfigError, PairArray
from .representation import char_ngrams

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _is_pow2(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


def splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, elementwise over uint64 arrays (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


# -- MinHash -----------------------------------------------------------------


@dataclass(frozen=True)
class MinHashConfig:
    bands: int = 32
    rows: int = 8
    k: int = 2
    cleaning: bool = False

    def __post_init__(self):
        if not (_is_pow2(self.bands) and _is_pow2(self.rows)):
            raise ConfigError("#bands and #rows must be powers of two")
        if self.bands * self.rows not in (128, 256, 512):
            raise ConfigError(f"#bands x #rows must be 128, 256 or 512, got {self.bands * self.rows}")
        if not 2 <= self.k <= 5:
            raise ConfigError(f"shingle size k must be in [2, 5], got {self.k}")

    @property
    def num_hashes(self) -> int:
        return self.bands * self.rows

    @property
    def implied_threshold(self) -> float:
        """Jaccard similarity at which the banding S-curve is steepest."""
        return (1.0 / self.bands) ** (1.0 / self.rows)


def shingles(text: str, k: int) -> frozenset[str]:
    return frozenset(char_ngrams(text, k))


def shingle_hashes(items) -> np.ndarray:
    """64-bit base hash of every shingle (seed-independent)."""
    return np.array(
        [int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "little")
         for s in sorted(items)],
        dtype=np.uint64,
    )


class MinHasher:
    """``num_hashes`` independent seeded hash functions; a signature keeps the
    minimum of each over a set's elements."""

    def __init__(self, num_hashes: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.seeds = rng.integers(0, 2**64 - 1, size=num_hashes, dtype=np.uint64, endpoint=True)
        self.num_hashes = num_hashes

    def signature(self, items) -> np.ndarray:
        base = shingle_hashes(items)
        if base.size == 0:
            return np.full(self.num_hashes, _MASK64, dtype=np.uint64)
        mixed = splitmix64(base[None, :] ^ self.seeds[:, None])
        return mixed.min(axis=1)


def minhash_signature(items, num_hashes: int, seed: int = 0) -> np.ndarray:
    return MinHasher(num_hashes, seed).signature(items)


def _band_labels(sigs: np.ndarray, band: int, rows: int) -> np.ndarray:
    part = np.ascontiguousarray(sigs[:, band * rows:(band + 1) * rows])
    view = part.view(np.dtype((np.void, part.dtype.itemsize * rows))).ravel()
    _, labels = np.unique(view, return_inverse=True)
    return labels.ravel()


def minhash_lsh(left: Sequence[frozenset[str]], right: Sequence[frozenset[str]],
                cfg: MinHashConfig, seed: int = 0) -> PairArray:
    """Cross-side pairs whose signatures agree on every row of at least one band.

    Records with no shingles are never candidates.
    """
    hasher = MinHasher(cfg.num_hashes, seed)
    sigs = np.vstack([hasher.signature(s) for s in list(left) + list(right)]) \
        if (len(left) + len(right)) else np.zeros((0, cfg.num_hashes), dtype=np.uint64)
    n1 = len(left)
    nonempty = np.array([bool(s) for s in list(left) + list(right)], dtype=bool)
    codes = []
    for band in range(cfg.bands):
        labels = _band_labels(sigs, band, cfg.rows)
        buckets: dict[int, tuple[list[int], list[int]]] = defaultdict(lambda: ([], []))
        for idx in np.flatnonzero(nonempty).tolist():
            if idx < n1:
                buckets[labels[idx]][0].append(idx)
            else:
                buckets[labels[idx]][1].append(idx - n1)
        for lefts, rights in buckets.values():
            if lefts and rights:
                li = np.asarray(lefts, dtype=np.int64)
                ri = np.asarray(rights, dtype=np.int64)
                codes.append((li[:, None] * len(right) + ri[None, :]).ravel())
    all_codes = np.concatenate(codes) if codes else np.zeros(0, dtype=np.int64)
    return PairArray.from_codes(all_codes, n1, len(right))


def band_collision_probability(jaccard: float, bands: int, rows: int) -> float:
    return 1.0 - (1.0 - jaccard ** rows) ** bands


# -- dense vectors: exact search ---------------------------------------------


def as_matrix(vectors: Sequence[np.ndarray]) -> np.ndarray:
    mat = np.asarray(np.vstack(vectors) if len(vectors) else np.zeros((0, 1)), dtype=np.float64)
    return mat


def flat_neighbors(indexed: np.ndarray, queries: np.ndarray, k: int, chunk: int = 32) -> list[np.ndarray]:
    """Exact Euclidean top-k of every query; equal distances resolve to the lower index."""
    if k < 1:
        raise ConfigError(f"K must be >= 1, got {k}")
    out = []
    n = indexed.shape[0]
    kk = min(k, n)
    for start in range(0, queries.shape[0], chunk):
        q = queries[start:start + chunk]
        d2 = ((q[:, None, :] - indexed[None, :, :]) ** 2).sum(axis=2)
        for row in d2:
            order = np.lexsort((np.arange(n), row))
            out.append(order[:kk])
    return out


def flat_knn(left: np.ndarray, right: np.ndarray, k: int, reverse: bool = False) -> PairArray:
    """Exhaustive kNN search. E1 is indexed and E2 queries unless ``reverse``."""
    indexed, queries = (right, left) if reverse else (left, right)
    rows, cols = [], []
    for q_idx, nbrs in enumerate(flat_neighbors(indexed, queries, k)):
        if reverse:
            rows.append(np.full(nbrs.size, q_idx, dtype=np.int64))
            cols.append(nbrs.astype(np.int64))
        else:
            rows.append(nbrs.astype(np.int64))
            cols.append(np.full(nbrs.size, q_idx, dtype=np.int64))
    n1, n2 = left.shape[0], right.shape[0]
    if not rows:
        return PairArray.from_pairs([], n1, n2)
    return PairArray.from_codes(np.concatenate(rows) * n2 + np.concatenate(cols), n1, n2)


# -- dense vectors: LSH -------------------------------------------------------


class LshFamily(enum.Enum):
    HYPERPLANE = "hyperplane"
    CROSS_POLYTOPE = "cross-polytope"


@dataclass(frozen=True)
class LshConfig:
    family: LshFamily = LshFamily.HYPERPLANE
    tables: int = 1
    hashes: int = 1
    cp_dimension: int | None = None
    probes: int | None = None
    cleaning: bool = False

    def __post_init__(self):
        if not 1 <= self.tables <= 512:
            raise ConfigError(f"#tables must be in [1, 512], got {self.tables}")
        if not 1 <= self.hashes <= 20:
            raise ConfigError(f"#hashes must be in [1, 20], got {self.hashes}")
        if self.family is LshFamily.CROSS_POLYTOPE:
            if self.cp_dimension is None or not _is_pow2(self.cp_dimension) or self.cp_dimension > 512:
                raise ConfigError("cp dimension must be a power of two in [1, 512]")
        elif self.cp_dimension is not None:
            raise ConfigError("cp dimension applies to cross-polytope LSH only")
        if self.probes is not None and self.probes < self.tables:
            raise ConfigError("#probes must be at least #tables")

    @property
    def num_probes(self) -> int:
        return self.tables if self.probes is None else self.probes


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def fwht(x: np.ndarray) -> np.ndarray:
    """Orthonormal fast Walsh-Hadamard transform along the last axis (length 2^m)."""
    x = np.array(x, dtype=np.float64, copy=True)
    n = x.shape[-1]
    h = 1
    while h < n:
        y = x.reshape(x.shape[:-1] + (n // (2 * h), 2, h))
        a = y[..., 0, :].copy()
        b = y[..., 1, :]
        y[..., 0, :] = a + b
        y[..., 1, :] = a - b
        h *= 2
    return x / np.sqrt(n)


class HyperplaneHasher:
    """``tables`` x ``hashes`` random Gaussian directions; a hash is sign(<r, v>)."""

    def __init__(self, dim: int, tables: int, hashes: int, seed: int = 0):
        self.dim, self.tables, self.hashes = dim, tables, hashes
        self.directions = np.stack([
            np.random.default_rng([seed, t]).standard_normal((hashes, dim)) for t in range(tables)
        ])

    def projections(self, vecs: np.ndarray) -> np.ndarray:
        """(n, tables, hashes) inner products."""
        return np.einsum("thd,nd->nth", self.directions, vecs)

    def keys(self, vecs: np.ndarray) -> np.ndarray:
        bits = self.projections(vecs) >= 0
        return bits.astype(np.int8)

    def alternatives(self, proj: np.ndarray, limit: int | None = None):
        """Per table and hash: [(cost, value), ...] sorted by cost; the first is the
        hash itself, the second its flip at cost |<r, v>|."""
        out = []
        for t in range(self.tables):
            row = []
            for h in range(self.hashes):
                p = float(proj[t, h])
                bit = 1 if p >= 0 else 0
                row.append(((0.0, bit), (abs(p), 1 - bit)))
            out.append(row)
        return out


def hyperplane_hash(v: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Sign bits of ``v`` against each row of ``directions``."""
    return (directions @ v >= 0).astype(np.int8)


class CrossPolytopeHasher:
    """Pseudo-random rotations (three rounds of random sign flips followed by a
    Hadamard transform) of the zero-padded vector; the hash is the closest
    signed basis vector among the first ``cp_dimension`` rotated coordinates."""

    def __init__(self, dim: int, tables: int, hashes: int, cp_dimension: int, seed: int = 0):
        self.dim = dim
        self.padded = next_pow2(dim)
        if cp_dimension > self.padded:
            raise ConfigError(f"cp dimension {cp_dimension} exceeds padded dimension {self.padded}")
        self.tables, self.hashes, self.cp_dimension = tables, hashes, cp_dimension
        self.signs = np.stack([
            np.random.default_rng([seed, t]).choice([-1.0, 1.0], size=(hashes, 3, self.padded))
            for t in range(tables)
        ])

    def rotate_table(self, vecs: np.ndarray, table: int) -> np.ndarray:
        """(n, hashes, cp_dimension) rotated coordinates for one table."""
        n = vecs.shape[0]
        x = np.zeros((n, self.padded))
        x[:, :self.dim] = vecs
        x = np.broadcast_to(x[:, None, :], (n, self.hashes, self.padded))
        for r in range(3):
            x = fwht(x * self.signs[table][None, :, r, :])
        return x[..., :self.cp_dimension]

    def rotate(self, vecs: np.ndarray) -> np.ndarray:
        """(n, tables, hashes, cp_dimension) rotated coordinates."""
        return np.stack([self.rotate_table(vecs, t) for t in range(self.tables)], axis=1)

    def keys(self, vecs: np.ndarray) -> np.ndarray:
        return np.stack([vertex_index(self.rotate_table(vecs, t)) for t in range(self.tables)], axis=1)

    def alternatives(self, rotated: np.ndarray, limit: int | None = None):
        """Per table and hash: the ``limit`` cheapest vertices with their cost (gap
        to the best vertex's signed coordinate), in increasing cost order."""
        out = []
        for t in range(self.tables):
            row = []
            for h in range(self.hashes):
                y = rotated[t, h]
                vals = np.concatenate([y, -y])  # vertex 2*axis -> +axis, 2*axis+1 -> -axis
                vertex = np.empty(vals.size, dtype=np.int64)
                vertex[: y.size] = 2 * np.arange(y.size)
                vertex[y.size:] = 2 * np.arange(y.size) + 1
                best = vals.max()
                order = np.lexsort((vertex, best - vals))[:limit]
                row.append(tuple((float(best - vals[i]), int(vertex[i])) for i in order))
            out.append(row)
        return out


def vertex_index(rotated: np.ndarray) -> np.ndarray:
    """Index of the closest cross-polytope vertex: 2*axis for +e_axis, 2*axis+1 for -e_axis."""
    axis = np.argmax(np.abs(rotated), axis=-1)
    coord = np.take_along_axis(rotated, axis[..., None], axis=-1)[..., 0]
    return 2 * axis + (coord < 0)


def crosspolytope_hash(v: np.ndarray, hasher: CrossPolytopeHasher) -> np.ndarray:
    return hasher.keys(v[None, :])[0]


def probe_sequence(alternatives, num_probes: int) -> list[tuple[int, tuple]]:
    """The ``num_probes`` lowest-cost (table, bucket key) probes.

    A probe picks one alternative per hash function of a table; its cost is the
    sum of the chosen alternatives' costs. Ties resolve by table, then by the
    alternative indices.
    """
    heap = []
    seen = set()
    for t, row in enumerate(alternatives):
        idx = (0,) * len(row)
        heap.append((sum(a[0][0] for a in row), t, idx))
        seen.add((t, idx))
    heapq.heapify(heap)
    out = []
    while heap and len(out) < num_probes:
        cost, t, idx = heapq.heappop(heap)
        row = alternatives[t]
        out.append((t, tuple(row[h][i][1] for h, i in enumerate(idx))))
        for h in range(len(idx)):
            if idx[h] + 1 < len(row[h]):
                nxt = idx[:h] + (idx[h] + 1,) + idx[h + 1:]
                if (t, nxt) not in seen:
                    seen.add((t, nxt))
                    new_cost = cost - row[h][idx[h]][0] + row[h][idx[h] + 1][0]
                    heapq.heappush(heap, (new_cost, t, nxt))
    return out


_CHUNK = 64


class LshIndex:
    """Hash tables over the indexed vectors; immutable after construction."""

    def __init__(self, vectors: np.ndarray, cfg: LshConfig, seed: int = 0):
        self.cfg = cfg
        self.n = vectors.shape[0]
        dim = vectors.shape[1]
        if cfg.family is LshFamily.HYPERPLANE:
            self.hasher = HyperplaneHasher(dim, cfg.tables, cfg.hashes, seed)
        else:
            self.hasher = CrossPolytopeHasher(dim, cfg.tables, cfg.hashes, cfg.cp_dimension, seed)
        self.tables: list[dict[tuple, list[int]]] = [defaultdict(list) for _ in range(cfg.tables)]
        for start in range(0, self.n, _CHUNK):
            keys = self.hasher.keys(vectors[start:start + _CHUNK]).tolist()
            for offset, per_table in enumerate(keys):
                for t, key in enumerate(per_table):
                    self.tables[t][tuple(key)].append(start + offset)

    def _query_alternatives(self, vecs: np.ndarray, limit: int):
        for start in range(0, vecs.shape[0], _CHUNK):
            chunk = vecs[start:start + _CHUNK]
            if self.cfg.family is LshFamily.HYPERPLANE:
                per_query = self.hasher.projections(chunk)
            else:
                per_query = self.hasher.rotate(chunk)
            for item in per_query:
                yield self.hasher.alternatives(item, limit)

    def query(self, vecs: np.ndarray, num_probes: int | None = None) -> list[set[int]]:
        probes = self.cfg.num_probes if num_probes is None else num_probes
        out = []
        # a sequence of P probes never reaches an alternative ranked P or later
        for alts in self._query_alternatives(vecs, probes):
            found: set[int] = set()
            for t, key in probe_sequence(alts, probes):
                found.update(self.tables[t].get(key, ()))
            out.append(found)
        return out

    def total_buckets(self) -> int:
        """Number of probes that enumerates every possible bucket of every table."""
        if self.cfg.family is LshFamily.HYPERPLANE:
            per_table = 2 ** self.cfg.hashes
        else:
            per_table = (2 * self.cfg.cp_dimension) ** self.cfg.hashes
        return per_table * self.cfg.tables


def lsh_query(index: LshIndex, queries: np.ndarray, num_probes: int | None = None,
              indexed_is_left: bool = True) -> PairArray:
    """Every indexed record found in any probed bucket of each query; no re-ranking."""
    hits = index.query(queries, num_probes)
    pairs = []
    for q_idx, found in enumerate(hits):
        for i in found:
            pairs.append((i, q_idx) if indexed_is_left else (q_idx, i))
    if indexed_is_left:
        return PairArray.from_pairs(pairs, index.n, queries.shape[0])
    return PairArray.from_pairs(pairs, queries.shape[0], index.n)


def lsh_join(left: np.ndarray, right: np.ndarray, cfg: LshConfig, seed: int = 0) -> PairArray:
    """Index E1, query with E2."""
    return lsh_query(LshIndex(left, cfg, seed), right, cfg.num_probes)
