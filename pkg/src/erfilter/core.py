"""Entity model shared by every filter, plus the PC / PQ effectiveness metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np


class ERFilterError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ERFilterError, ValueError):
    """A configuration value is outside its domain or inconsistent."""


class DataError(ERFilterError, ValueError):
    """Input data violates a structural invariant."""


class DuplicateIdError(DataError):
    pass


class MalformedRowError(DataError):
    pass


class InputEncodingError(DataError):
    pass


class UnknownIdError(DataError):
    def __init__(self, message: str, offenders: Sequence[str] = ()):
        super().__init__(message)
        self.offenders = list(offenders)


class EmptyGroundTruthError(DataError):
    pass


@dataclass(frozen=True)
class EntityProfile:
    """One record: an opaque id and its ordered (attribute, value) pairs."""

    id: str
    pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.id:
            raise DataError("entity id must be non-empty")
        object.__setattr__(self, "pairs", tuple((str(n), str(v)) for n, v in self.pairs))

    def values(self, attribute: str | None = None) -> list[str]:
        if attribute is None:
            return [v for _, v in self.pairs]
        return [v for n, v in self.pairs if n == attribute]

    @property
    def attributes(self) -> set[str]:
        return {n for n, _ in self.pairs}


@dataclass(frozen=True)
class EntityCollection:
    label: str
    profiles: tuple[EntityProfile, ...]

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        seen: set[str] = set()
        dups = []
        for p in self.profiles:
            if p.id in seen:
                dups.append(p.id)
            seen.add(p.id)
        if dups:
            raise DuplicateIdError(f"{self.label}: duplicate ids {sorted(set(dups))[:10]}")
        object.__setattr__(self, "_index", {p.id: i for i, p in enumerate(self.profiles)})

    def __len__(self) -> int:
        return len(self.profiles)

    def __iter__(self):
        return iter(self.profiles)

    def __getitem__(self, i: int) -> EntityProfile:
        return self.profiles[i]

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.profiles]

    def index_of(self, entity_id: str) -> int:
        return self._index[entity_id]

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self._index

    @classmethod
    def from_records(cls, label: str, records: Iterable[Mapping[str, str]], id_field: str = "id"):
        profiles = []
        for rec in records:
            pairs = tuple((k, "" if v is None else v) for k, v in rec.items() if k != id_field)
            profiles.append(EntityProfile(str(rec[id_field]), pairs))
        return cls(label, tuple(profiles))


class CandidatePair(NamedTuple):
    """A cross-collection pair; ``left`` is always an E1 id."""

    left: str
    right: str


@dataclass(frozen=True)
class CandidateSet:
    pairs: frozenset[CandidatePair]
    provenance: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "pairs", frozenset(CandidatePair(*p) for p in self.pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __contains__(self, pair) -> bool:
        return CandidatePair(*pair) in self.pairs

    def union(self, other: "CandidateSet") -> "CandidateSet":
        return CandidateSet(self.pairs | other.pairs)

    def sorted(self) -> list[CandidatePair]:
        return sorted(self.pairs)


@dataclass(frozen=True)
class GroundTruth:
    matches: frozenset[CandidatePair]

    def __post_init__(self):
        object.__setattr__(self, "matches", frozenset(CandidatePair(*p) for p in self.matches))

    def __len__(self) -> int:
        return len(self.matches)

    def __iter__(self):
        return iter(self.matches)

    def validate(self, e1: EntityCollection, e2: EntityCollection, clean_clean: bool = True) -> None:
        """Check that every id resolves and, for Clean-Clean ER, that no id matches twice."""
        unknown = sorted(
            {m.left for m in self.matches if m.left not in e1}
            | {m.right for m in self.matches if m.right not in e2}
        )
        if unknown:
            raise UnknownIdError(
                f"ground truth references {len(unknown)} unknown ids: {unknown[:10]}", unknown
            )
        if clean_clean:
            for side in ("left", "right"):
                ids = [getattr(m, side) for m in self.matches]
                if len(ids) != len(set(ids)):
                    repeated = sorted({i for i in ids if ids.count(i) > 1})
                    raise DataError(f"id matched more than once on the {side} side: {repeated[:10]}")


def pair_completeness(c: CandidateSet, gt: GroundTruth) -> float:
    """Recall of ``c``: the share of ground-truth matches it contains."""
    if not gt.matches:
        raise EmptyGroundTruthError("pair completeness is undefined for an empty ground truth")
    return len(c.pairs & gt.matches) / len(gt.matches)


def pairs_quality(c: CandidateSet, gt: GroundTruth) -> float:
    """Precision of ``c``. An empty candidate set scores 0."""
    if not c.pairs:
        return 0.0
    return len(c.pairs & gt.matches) / len(c.pairs)


def dedupe(
    pairs: Iterable[Sequence[str]],
    e1: EntityCollection | None = None,
    e2: EntityCollection | None = None,
) -> CandidateSet:
    """Collapse ``pairs`` into a set, orienting each pair as (E1 id, E2 id) when
    the collections are given and rejecting ids found in neither orientation."""
    out = set()
    unknown = []
    for a, b in pairs:
        if e1 is not None and e2 is not None:
            if a in e1 and b in e2:
                pass
            elif b in e1 and a in e2:
                a, b = b, a
            else:
                unknown.append((a, b))
                continue
        out.add(CandidatePair(a, b))
    if unknown:
        raise UnknownIdError(f"{len(unknown)} pairs reference unknown ids: {unknown[:5]}",
                             [x for p in unknown for x in p])
    return CandidateSet(frozenset(out))


@dataclass(frozen=True, eq=False)
class PairArray:
    """Index-based candidate pairs (row into E1, column into E2), deduplicated
    and sorted. Filters produce these; ``to_candidate_set`` maps them to ids."""

    rows: "np.ndarray"
    cols: "np.ndarray"
    n_left: int
    n_right: int

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], n_left: int, n_right: int) -> "PairArray":
        arr = np.array(sorted(set(pairs)), dtype=np.int64).reshape(-1, 2)
        return cls(arr[:, 0].copy(), arr[:, 1].copy(), n_left, n_right)

    @classmethod
    def from_codes(cls, codes: "np.ndarray", n_left: int, n_right: int) -> "PairArray":
        codes = np.unique(np.asarray(codes, dtype=np.int64))
        return cls(codes // max(n_right, 1), codes % max(n_right, 1), n_left, n_right)

    def __len__(self) -> int:
        return int(self.rows.size)

    def codes(self) -> "np.ndarray":
        return self.rows * self.n_right + self.cols

    def as_set(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def to_candidate_set(
        self, e1: EntityCollection, e2: EntityCollection, provenance: dict | None = None
    ) -> CandidateSet:
        ids1, ids2 = e1.ids, e2.ids
        pairs = frozenset(
            CandidatePair(ids1[i], ids2[j]) for i, j in zip(self.rows.tolist(), self.cols.tolist())
        )
        return CandidateSet(pairs, dict(provenance or {}))
