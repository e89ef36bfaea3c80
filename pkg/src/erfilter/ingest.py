"""Loading entity collections, ground truth and embedding files; text rendering,
cleaning and dataset profiling."""

from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import porter
from .core import (
    CandidatePair,
    ConfigError,
    DataError,
    DuplicateIdError,
    EmptyGroundTruthError,
    EntityCollection,
    EntityProfile,
    GroundTruth,
    InputEncodingError,
    MalformedRowError,
)


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    """The bundled English stop-word list (179 entries)."""
    text = resources.files("erfilter").joinpath("data/stopwords_en.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


class SchemaMode(enum.Enum):
    AGNOSTIC = "agnostic"
    BASED = "based"


@dataclass(frozen=True)
class SchemaSetting:
    mode: SchemaMode = SchemaMode.AGNOSTIC
    attribute: str | None = None

    def __post_init__(self):
        if self.mode is SchemaMode.BASED and not self.attribute:
            raise ConfigError("schema-based setting requires an attribute name")
        if self.mode is SchemaMode.AGNOSTIC and self.attribute is not None:
            raise ConfigError("schema-agnostic setting takes no attribute")

    @classmethod
    def agnostic(cls) -> "SchemaSetting":
        return cls(SchemaMode.AGNOSTIC)

    @classmethod
    def based(cls, attribute: str) -> "SchemaSetting":
        return cls(SchemaMode.BASED, attribute)

    @classmethod
    def parse(cls, text: str) -> "SchemaSetting":
        """Parse ``agnostic`` or ``based:<attribute>``."""
        if text == "agnostic":
            return cls.agnostic()
        if text.startswith("based:") and len(text) > len("based:"):
            return cls.based(text[len("based:"):])
        raise ConfigError(f"bad schema setting {text!r}; expected 'agnostic' or 'based:<attr>'")

    def check_against(self, *collections: EntityCollection) -> None:
        if self.mode is SchemaMode.BASED:
            if not any(self.attribute in p.attributes for c in collections for p in c):
                raise ConfigError(f"attribute {self.attribute!r} occurs in no profile")

    def __str__(self) -> str:
        return "agnostic" if self.mode is SchemaMode.AGNOSTIC else f"based:{self.attribute}"


class Stemmer(enum.Enum):
    NONE = "none"
    PORTER = "porter"


@dataclass(frozen=True)
class CleaningConfig:
    enabled: bool = False
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    stemmer: Stemmer = Stemmer.PORTER

    @classmethod
    def on(cls) -> "CleaningConfig":
        return cls(enabled=True)

    @classmethod
    def off(cls) -> "CleaningConfig":
        return cls(enabled=False)


_PUNCT = re.compile(r"[^\w\s]|_")


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, turn punctuation into spaces and split on whitespace runs."""
    return _PUNCT.sub(" ", text.lower()).split()


def _stem_fixpoint(word: str) -> str:
    # a handful of Porter outputs stem further (agreed -> agre -> agr); iterating
    # keeps cleaning idempotent
    while True:
        nxt = porter.stem(word)
        if nxt == word:
            return word
        word = nxt


def clean_text(text: str, cleaning: CleaningConfig) -> str:
    if not cleaning.enabled:
        return text
    out = []
    for tok in normalize_tokens(text):
        if tok in cleaning.stopwords:
            continue
        if cleaning.stemmer is Stemmer.PORTER:
            tok = _stem_fixpoint(tok)
            if tok in cleaning.stopwords:
                continue
        out.append(tok)
    return " ".join(out)


def render_text(
    profile: EntityProfile,
    setting: SchemaSetting = SchemaSetting(),
    cleaning: CleaningConfig = CleaningConfig(enabled=False, stopwords=frozenset()),
) -> str:
    """Flatten a profile into one string under a schema setting.

    Schema-agnostic joins every non-empty value; schema-based keeps only the
    values of the chosen attribute (empty string when the profile lacks it).
    """
    if setting.mode is SchemaMode.AGNOSTIC:
        values = profile.values()
    else:
        values = profile.values(setting.attribute)
    text = " ".join(v.strip() for v in values if v.strip())
    return clean_text(text, cleaning)


def render_collection(
    collection: EntityCollection, setting: SchemaSetting, cleaning: CleaningConfig
) -> list[str]:
    return [render_text(p, setting, cleaning) for p in collection]


# -- loading ---------------------------------------------------------------


def _read_text(path: Path, encoding: str) -> str:
    try:
        return Path(path).read_bytes().decode(encoding)
    except UnicodeDecodeError as exc:
        raise InputEncodingError(f"{path}: not valid {encoding}: {exc}") from exc


def load_collection(
    path: str | Path,
    label: str | None = None,
    *,
    id_column: str = "id",
    delimiter: str = ",",
    encoding: str = "utf-8",
) -> EntityCollection:
    """Read a delimited file with a header row and a mandatory id column."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    text = _read_text(path, encoding)
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRowError(f"{path}: empty file") from None
    header = [h.strip() for h in header]
    if header and header[0].startswith("﻿"):
        header[0] = header[0][1:]
    if id_column not in header:
        raise MalformedRowError(f"{path}: missing id column {id_column!r} in header {header}")
    id_pos = header.index(id_column)
    profiles = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise MalformedRowError(
                f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}"
            )
        eid = row[id_pos].strip()
        if not eid:
            raise MalformedRowError(f"{path}:{lineno}: empty id")
        if eid in seen:
            raise DuplicateIdError(f"{path}:{lineno}: duplicate id {eid!r}")
        seen.add(eid)
        pairs = tuple((n, v) for i, (n, v) in enumerate(zip(header, row)) if i != id_pos)
        profiles.append(EntityProfile(eid, pairs))
    return EntityCollection(label or path.stem, tuple(profiles))


def load_groundtruth(
    path: str | Path,
    e1: EntityCollection,
    e2: EntityCollection,
    *,
    delimiter: str = ",",
    encoding: str = "utf-8",
    clean_clean: bool = True,
) -> GroundTruth:
    """Read a two-column file of (E1 id, E2 id) matches.

    A first row whose ids resolve in neither collection is taken as a header.
    """
    path = Path(path)
    text = _read_text(path, encoding)
    rows = [r for r in csv.reader(io.StringIO(text, newline=""), delimiter=delimiter) if r]
    if rows and not (rows[0][0].strip() in e1 or rows[0][-1].strip() in e2):
        rows = rows[1:]
    if not rows:
        raise EmptyGroundTruthError(f"{path}: no matches")
    pairs = []
    for lineno, row in enumerate(rows, start=1):
        if len(row) != 2:
            raise MalformedRowError(f"{path}: row {lineno} has {len(row)} fields, expected 2")
        pairs.append(CandidatePair(row[0].strip(), row[1].strip()))
    gt = GroundTruth(frozenset(pairs))
    gt.validate(e1, e2, clean_clean=clean_clean)
    return gt


def load_vectors(path: str | Path, encoding: str = "utf-8") -> dict[str, np.ndarray]:
    """Read ``id<TAB>f1 f2 ... fd`` lines and L2-normalize every vector."""
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    dim = None
    for lineno, line in enumerate(_read_text(path, encoding).splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise MalformedRowError(f"{path}:{lineno}: missing tab separator")
        eid, rest = line.split("\t", 1)
        try:
            vec = np.array([float(x) for x in rest.split()], dtype=np.float64)
        except ValueError as exc:
            raise MalformedRowError(f"{path}:{lineno}: {exc}") from exc
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise DataError(f"{path}:{lineno}: dimension {vec.size}, expected {dim}")
        if not np.all(np.isfinite(vec)):
            raise DataError(f"{path}:{lineno}: non-finite component")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise DataError(f"{path}:{lineno}: zero vector cannot be normalized")
        if eid in out:
            raise DuplicateIdError(f"{path}:{lineno}: duplicate id {eid!r}")
        out[eid] = vec / norm
    return out


def save_vectors(path: str | Path, vectors: dict[str, np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for eid, vec in vectors.items():
            fh.write(eid + "\t" + " ".join(repr(float(x)) for x in vec) + "\n")


# -- profiling -------------------------------------------------------------


@dataclass(frozen=True)
class AttributeStats:
    name: str
    coverage: float
    distinctiveness: float
    gt_coverage: float


def attribute_stats(
    e1: EntityCollection, e2: EntityCollection, gt: GroundTruth | None = None
) -> list[AttributeStats]:
    """Coverage, distinctiveness and ground-truth coverage per attribute name."""
    total = len(e1) + len(e2)
    names = sorted({n for c in (e1, e2) for p in c for n, _ in p.pairs})
    matched = []
    if gt is not None:
        for m in gt:
            matched.append(e1[e1.index_of(m.left)])
            matched.append(e2[e2.index_of(m.right)])
    stats = []
    for name in names:
        values = []
        for c in (e1, e2):
            for p in c:
                v = " ".join(x.strip() for x in p.values(name) if x.strip())
                if v:
                    values.append(v)
        covered = len(values)
        coverage = covered / total if total else 0.0
        distinct = len(set(values)) / covered if covered else 0.0
        if matched:
            hits = sum(1 for p in matched if any(x.strip() for x in p.values(name)))
            gt_cov = hits / len(matched)
        else:
            gt_cov = 0.0
        stats.append(AttributeStats(name, coverage, distinct, gt_cov))
    return stats


def best_attribute(stats: list[AttributeStats]) -> str:
    """Attribute maximizing coverage x distinctiveness (ties: name order)."""
    if not stats:
        raise DataError("no attributes to choose from")
    return max(stats, key=lambda s: (s.coverage * s.distinctiveness, s.coverage, _neg(s.name))).name


def _neg(name: str):
    return tuple(-ord(c) for c in name)


@dataclass(frozen=True)
class DatasetProfile:
    vocabulary_size: int
    character_length: int
    pairs_e1: int
    pairs_e2: int


def dataset_profile(
    e1: EntityCollection,
    e2: EntityCollection,
    setting: SchemaSetting = SchemaSetting(),
    cleaning: CleaningConfig = CleaningConfig(enabled=False, stopwords=frozenset()),
) -> DatasetProfile:
    vocab: set[str] = set()
    chars = 0
    for c in (e1, e2):
        for text in render_collection(c, setting, cleaning):
            vocab.update(text.split())
            chars += len(text)

    def n_pairs(c: EntityCollection) -> int:
        if setting.mode is SchemaMode.AGNOSTIC:
            return sum(1 for p in c for _, v in p.pairs if v.strip())
        return sum(1 for p in c for n, v in p.pairs if n == setting.attribute and v.strip())

    return DatasetProfile(len(vocab), chars, n_pairs(e1), n_pairs(e2))

