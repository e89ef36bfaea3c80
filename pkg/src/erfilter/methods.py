"""One entry point per filtering method: resolve a FilterConfig, render the
collections, run the filter with stage timings and score the candidates."""

from __future__ import annotations

import enum
import hashlib
import time
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from . import blockrefine as br
from .blockbuild import BlockBuildConfig, BuildMethod
from .core import (
    ConfigError,
    DataError,
    EntityCollection,
    GroundTruth,
    PairArray,
    pair_completeness,
    pairs_quality,
)
from .ingest import CleaningConfig, SchemaMode, SchemaSetting, clean_text, normalize_tokens, render_collection
from .joins import JoinDiagnostics, edit_join, epsilon_join, knn_join
from .nnsearch import (
    LshConfig,
    LshFamily,
    LshIndex,
    MinHashConfig,
    flat_knn,
    lsh_query,
    minhash_lsh,
    shingles,
)
from .representation import Measure, ReprModel, char_ngrams, tokenize


class Family(enum.Enum):
    BLOCKING = "blocking"
    JOIN = "join"
    NN = "nn"


class Method(enum.Enum):
    PBW = "pbw"
    DBW = "dbw"
    SBW = "sbw"
    QBW = "qbw"
    EQBW = "eqbw"
    SABW = "sabw"
    ESABW = "esabw"
    EPS_JOIN = "eps-join"
    KNN_JOIN = "knn-join"
    DKNN_JOIN = "dknn-join"
    EDIT_JOIN = "edit-join"
    MH_LSH = "mh-lsh"
    HP_LSH = "hp-lsh"
    CP_LSH = "cp-lsh"
    FLAT_KNN = "flat-knn"

    @classmethod
    def parse(cls, name: str) -> "Method":
        try:
            return cls(name.lower())
        except ValueError:
            known = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown method {name!r}; known: {known}") from None

    @property
    def family(self) -> Family:
        if self.value.endswith("bw"):
            return Family.BLOCKING
        if self.value.endswith("join"):
            return Family.JOIN
        return Family.NN

    @property
    def stochastic(self) -> bool:
        return self in (Method.MH_LSH, Method.HP_LSH, Method.CP_LSH)

    @property
    def stages(self) -> tuple[str, ...]:
        if self.family is Family.BLOCKING:
            return ("t_b", "t_p", "t_f", "t_c")
        return ("t_r", "t_i", "t_q")


_BUILDERS = {
    Method.SBW: BuildMethod.STANDARD,
    Method.QBW: BuildMethod.QGRAMS,
    Method.EQBW: BuildMethod.EXTENDED_QGRAMS,
    Method.SABW: BuildMethod.SUFFIX_ARRAYS,
    Method.ESABW: BuildMethod.EXTENDED_SUFFIX_ARRAYS,
}

# every key a method accepts, with its default; None means "required"
_PARAMS: dict[Method, dict[str, Any]] = {
    Method.PBW: {},
    Method.DBW: {},
    Method.SBW: {"bp": False, "bfr": 1.0, "pa": "CP", "ws": None},
    Method.QBW: {"q": None, "bp": False, "bfr": 1.0, "pa": "CP", "ws": None},
    Method.EQBW: {"q": None, "t": None, "bp": False, "bfr": 1.0, "pa": "CP", "ws": None},
    Method.SABW: {"lmin": None, "bmax": None, "bp": False, "bfr": 1.0, "pa": "CP", "ws": None},
    Method.ESABW: {"lmin": None, "bmax": None, "bp": False, "bfr": 1.0, "pa": "CP", "ws": None},
    Method.EPS_JOIN: {"cl": False, "sm": "cosine", "rm": "T1G", "t": None},
    Method.KNN_JOIN: {"cl": False, "sm": "cosine", "rm": "T1G", "K": None, "rvs": False},
    Method.DKNN_JOIN: {},
    Method.EDIT_JOIN: {"cl": False},
    Method.MH_LSH: {"cl": False, "bands": None, "rows": None, "k": None},
    Method.HP_LSH: {"cl": False, "tables": None, "hashes": None, "probes": None},
    Method.CP_LSH: {"cl": False, "tables": None, "hashes": None, "cp_dim": None, "probes": None},
    Method.FLAT_KNN: {"cl": False, "K": None, "rvs": False},
}

_BOOL_KEYS = {"bp", "cl", "rvs"}
_INT_KEYS = {"q", "lmin", "bmax", "K", "bands", "rows", "k", "tables", "hashes", "cp_dim", "probes"}
_FLOAT_KEYS = {"t", "bfr"}


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in _BOOL_KEYS:
        if isinstance(value, str):
            low = value.strip().lower()
            if low in ("1", "true", "yes", "y", "on"):
                return True
            if low in ("0", "false", "no", "n", "off", "-"):
                return False
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return bool(value)
    try:
        if key in _INT_KEYS:
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        if key in _FLOAT_KEYS:
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: bad numeric value {value!r}") from None
    return str(value)


def _sort_token(v: Any) -> tuple:
    # None < bool < number < string, so mixed columns still order totally
    if v is None:
        return (0, 0)
    if isinstance(v, bool):
        return (1, int(v))
    if isinstance(v, (int, float)):
        return (2, float(v))
    return (3, str(v))


@dataclass(frozen=True)
class FilterConfig:
    """A method plus its fully resolved parameters (defaults filled in)."""

    method: Method
    params: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def of(cls, method: Method | str, **params) -> "FilterConfig":
        if isinstance(method, str):
            method = Method.parse(method)
        allowed = _PARAMS[method]
        unknown = sorted(set(params) - set(allowed))
        if unknown:
            raise ConfigError(f"{method.value} does not take {unknown}; accepted: {sorted(allowed)}")
        resolved = {}
        for key, default in allowed.items():
            value = _coerce(key, params.get(key, default))
            if value is None and key not in ("ws", "probes") and default is None:
                raise ConfigError(f"{method.value} requires parameter {key!r}")
            resolved[key] = value
        cfg = cls(method, tuple(sorted(resolved.items())))
        cfg.validate()
        return cfg

    def get(self, key: str, default: Any = None) -> Any:
        for k, v in self.params:
            if k == key:
                return v
        return default

    def to_dict(self) -> dict:
        """Method plus every parameter; baselines spell out their fixed settings."""
        out = {"method": self.method.value, **dict(self.params)}
        if self.method in (Method.PBW, Method.DBW):
            build, refine = self.blocking()
            out.update(builder=build.method.value, **build.params(), **refine.params())
        elif self.method is Method.DKNN_JOIN:
            out.update(DKNN_FIXED)
        return out

    def sort_key(self) -> tuple:
        return (self.method.value,) + tuple((k, _sort_token(v)) for k, v in self.params)

    def __str__(self) -> str:
        inner = " ".join(f"{k}={v}" for k, v in self.params if v is not None)
        return f"{self.method.value}({inner})" if inner else self.method.value

    def validate(self) -> None:
        """Build the typed per-family configs, raising ConfigError on bad values."""
        fam = self.method.family
        if fam is Family.BLOCKING:
            self.blocking()
        elif self.method is Method.EPS_JOIN or self.method is Method.KNN_JOIN:
            self.join_settings()
        elif self.method is Method.MH_LSH:
            self.minhash()
        elif self.method in (Method.HP_LSH, Method.CP_LSH):
            self.lsh()
        elif self.method is Method.FLAT_KNN:
            if not 1 <= self.get("K") <= 5000:
                raise ConfigError(f"K must be in [1, 5000], got {self.get('K')}")

    # typed views -----------------------------------------------------------

    def blocking(self) -> tuple[BlockBuildConfig, br.RefineConfig]:
        if self.method is Method.PBW:
            return br.PBW_BUILD, br.PBW_REFINE
        if self.method is Method.DBW:
            return br.DBW_BUILD, br.DBW_REFINE
        build = BlockBuildConfig(
            _BUILDERS[self.method], q=self.get("q"), t=self.get("t"),
            l_min=self.get("lmin"), b_max=self.get("bmax"),
        )
        pa, ws = self.get("pa"), self.get("ws")
        if pa is None or pa.upper() == "CP":
            if ws is not None:
                raise ConfigError("a weighting scheme needs a meta-blocking pruning algorithm, not CP")
            scheme = algo = None
        else:
            if ws is None:
                raise ConfigError(f"pruning algorithm {pa} needs a weighting scheme (ws)")
            scheme, algo = br.WeightScheme.parse(ws), br.PruneAlgo.parse(pa)
        refine = br.RefineConfig(purge=self.get("bp"), filter_ratio=self.get("bfr"),
                                 scheme=scheme, algo=algo)
        return build, refine

    def join_settings(self) -> tuple[Measure, ReprModel]:
        measure = Measure.parse(self.get("sm"))
        model = ReprModel.parse(self.get("rm"))
        if self.method is Method.EPS_JOIN:
            t = self.get("t")
            if not 0.0 <= t <= 1.0:
                raise ConfigError(f"similarity threshold t must be in [0, 1], got {t}")
        else:
            k = self.get("K")
            if not 1 <= k <= 100:
                raise ConfigError(f"K must be in [1, 100], got {k}")
        return measure, model

    def minhash(self) -> MinHashConfig:
        return MinHashConfig(self.get("bands"), self.get("rows"), self.get("k"), self.get("cl"))

    def lsh(self) -> LshConfig:
        fam = LshFamily.CROSS_POLYTOPE if self.method is Method.CP_LSH else LshFamily.HYPERPLANE
        return LshConfig(fam, self.get("tables"), self.get("hashes"),
                         self.get("cp_dim") if fam is LshFamily.CROSS_POLYTOPE else None,
                         self.get("probes"), self.get("cl"))


DKNN_FIXED = {"cl": True, "sm": "cosine", "rm": "C5GM", "K": 5, "rvs": "smaller-queries"}


def baseline_pbw() -> FilterConfig:
    """Standard Blocking, Block Purging and Comparison Propagation."""
    return FilterConfig.of(Method.PBW)


def baseline_dbw() -> FilterConfig:
    """Q-Grams (q=6), Block Filtering (0.5) and WEP over ECBS weights."""
    return FilterConfig.of(Method.DBW)


def baseline_dknn() -> FilterConfig:
    return FilterConfig.of(Method.DKNN_JOIN)


# -- data preparation --------------------------------------------------------


@dataclass
class Dataset:
    """Two collections, their ground truth and optional dense vectors, already
    loaded; everything a run needs besides the config."""

    e1: EntityCollection
    e2: EntityCollection
    gt: GroundTruth | None = None
    name: str = "adhoc"
    vectors1: np.ndarray | None = None
    vectors2: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def texts(self, setting: SchemaSetting) -> tuple[list[str], list[str]]:
        key = ("texts", str(setting))
        if key not in self._cache:
            off = CleaningConfig.off()
            self._cache[key] = (render_collection(self.e1, setting, off),
                                render_collection(self.e2, setting, off))
        return self._cache[key]

    def attach_vectors(self, vectors1: Mapping[str, np.ndarray], vectors2: Mapping[str, np.ndarray]) -> None:
        """Align per-collection id -> vector mappings with E1 and E2."""
        for label, coll, vecs in (("E1", self.e1, vectors1), ("E2", self.e2, vectors2)):
            missing = [p.id for p in coll if p.id not in vecs]
            if missing:
                raise DataError(f"{label}: {len(missing)} entities have no vector, e.g. {missing[:5]}")
        self.vectors1 = np.vstack([vectors1[p.id] for p in self.e1])
        self.vectors2 = np.vstack([vectors2[p.id] for p in self.e2])


EMBED_DIM = 256


def hashed_embedding(texts: list[str], dim: int = EMBED_DIM, n: int = 3) -> np.ndarray:
    """Stand-in dense vectors when no embedding file is supplied: a feature-hashed
    bag of character n-grams, L2-normalized. Empty texts map to zero vectors."""
    out = np.zeros((len(texts), dim))
    for i, text in enumerate(texts):
        for g in char_ngrams(text.lower(), n):
            h = int.from_bytes(hashlib.blake2b(g.encode("utf-8"), digest_size=8).digest(), "little")
            out[i, h % dim] += 1.0 if (h >> 63) & 1 else -1.0
        norm = np.linalg.norm(out[i])
        if norm > 0:
            out[i] /= norm
    return out


# -- running -----------------------------------------------------------------


@dataclass
class RunReport:
    dataset: str
    schema: str
    method: str
    config: dict
    pc: float | None
    pq: float | None
    candidates: int
    rt_total: float
    timings: dict[str, float]
    seeds: list[int] = field(default_factory=list)
    per_seed: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    STAGES = ("t_b", "t_p", "t_f", "t_c", "t_r", "t_i", "t_q")

    def row(self) -> dict:
        """Flat record with every stage column present (zero when inapplicable)."""
        out = {
            "dataset": self.dataset, "schema": self.schema, "method": self.method,
            "config": " ".join(f"{k}={v}" for k, v in self.config.items() if k != "method"),
            "pc": self.pc, "pq": self.pq, "candidates": self.candidates, "rt_total": self.rt_total,
        }
        for s in self.STAGES:
            out[s] = self.timings.get(s, 0.0)
        out["seeds"] = " ".join(map(str, self.seeds))
        return out


@dataclass(frozen=True, eq=False)
class RunOutput:
    pairs: PairArray
    timings: dict[str, float]
    diagnostics: dict


def _clean(texts: list[str], on: bool) -> list[str]:
    if not on:
        return texts
    cfg = CleaningConfig.on()
    return [clean_text(t, cfg) for t in texts]


def _block_text(text: str) -> str:
    return " ".join(normalize_tokens(text))


def run_filter(ds: Dataset, cfg: FilterConfig, setting: SchemaSetting, seed: int = 0) -> RunOutput:
    """Execute one filter once. Loading is not timed; rendering is."""
    left, right = ds.texts(setting)
    m = cfg.method
    timings: dict[str, float] = {s: 0.0 for s in m.stages}
    diag: dict = {}

    if m.family is Family.BLOCKING:
        build, refine = cfg.blocking()
        t0 = time.perf_counter()
        lt = [_block_text(t) for t in left]
        rt = [_block_text(t) for t in right]
        prep = time.perf_counter() - t0
        res = br.run_blocking_workflow(lt, rt, build, refine)
        timings.update(res.timings)
        timings["t_b"] += prep
        diag["blocks"] = len(res.blocks)
        return RunOutput(res.pairs, timings, diag)

    if m is Method.EDIT_JOIN:
        if setting.mode is SchemaMode.AGNOSTIC:
            raise ConfigError("edit-join applies to the schema-based setting only")
        t0 = time.perf_counter()
        lt, rt = _clean(left, cfg.get("cl")), _clean(right, cfg.get("cl"))
        t1 = time.perf_counter()
        pairs = edit_join(lt, rt)
        timings.update(t_r=t1 - t0, t_q=time.perf_counter() - t1)
        return RunOutput(pairs, timings, diag)

    if m in (Method.EPS_JOIN, Method.KNN_JOIN, Method.DKNN_JOIN):
        if m is Method.DKNN_JOIN:
            measure, model = Measure.parse(DKNN_FIXED["sm"]), ReprModel.parse(DKNN_FIXED["rm"])
            k, cl = DKNN_FIXED["K"], DKNN_FIXED["cl"]
            # the smaller collection supplies the queries
            reverse = len(ds.e1) < len(ds.e2)
        else:
            measure, model = cfg.join_settings()
            cl = cfg.get("cl")
            k, reverse = cfg.get("K"), cfg.get("rvs", False)
        t0 = time.perf_counter()
        lt, rt = _clean(left, cl), _clean(right, cl)
        ls = [tokenize(t, model).tokens for t in lt]
        rs = [tokenize(t, model).tokens for t in rt]
        t1 = time.perf_counter()
        timings["t_r"] = t1 - t0
        jd = JoinDiagnostics()
        if m is Method.EPS_JOIN:
            pairs = epsilon_join(ls, rs, measure, cfg.get("t"), jd)
        else:
            pairs = knn_join(ls, rs, measure, k, reverse, jd)
        # indexing is interleaved with querying in ScanCount; it is reported
        # as part of t_q
        timings["t_q"] = time.perf_counter() - t1
        diag.update(empty_indexed=jd.empty_indexed, empty_queries=jd.empty_queries)
        return RunOutput(pairs, timings, diag)

    if m is Method.MH_LSH:
        mh = cfg.minhash()
        t0 = time.perf_counter()
        lt, rt = _clean(left, mh.cleaning), _clean(right, mh.cleaning)
        ls = [shingles(t, mh.k) for t in lt]
        rs = [shingles(t, mh.k) for t in rt]
        t1 = time.perf_counter()
        pairs = minhash_lsh(ls, rs, mh, seed)
        timings.update(t_r=t1 - t0, t_q=time.perf_counter() - t1)
        return RunOutput(pairs, timings, diag)

    # dense-vector methods
    t0 = time.perf_counter()
    if ds.vectors1 is not None and ds.vectors2 is not None:
        v1, v2 = ds.vectors1, ds.vectors2
        diag["vectors"] = "file"
    else:
        cl = cfg.get("cl")
        v1 = hashed_embedding(_clean(left, cl))
        v2 = hashed_embedding(_clean(right, cl))
        diag["vectors"] = f"hashed-c3g-{EMBED_DIM}"
    t1 = time.perf_counter()
    timings["t_r"] = t1 - t0
    if m is Method.FLAT_KNN:
        pairs = flat_knn(v1, v2, cfg.get("K"), cfg.get("rvs"))
        timings["t_q"] = time.perf_counter() - t1
        return RunOutput(pairs, timings, diag)
    lc = cfg.lsh()
    index = LshIndex(v1, lc, seed)
    t2 = time.perf_counter()
    pairs = lsh_query(index, v2, lc.num_probes)
    timings.update(t_i=t2 - t1, t_q=time.perf_counter() - t2)
    return RunOutput(pairs, timings, diag)


def evaluate(ds: Dataset, cfg: FilterConfig, setting: SchemaSetting, seeds: list[int] | None = None,
             keep_pairs: bool = False):
    """Run ``cfg`` (once per seed when stochastic) and score it.

    Returns (RunReport, PairArray of the last run or None).
    """
    if seeds is None:
        seeds = list(range(10)) if cfg.method.stochastic else [0]
    if not cfg.method.stochastic:
        seeds = seeds[:1]
    per_seed = []
    last = None
    for s in seeds:
        out = run_filter(ds, cfg, setting, s)
        cs = out.pairs.to_candidate_set(ds.e1, ds.e2)
        pc = pair_completeness(cs, ds.gt) if ds.gt is not None else None
        pq = pairs_quality(cs, ds.gt) if ds.gt is not None else None
        per_seed.append({"seed": s, "pc": pc, "pq": pq, "candidates": len(out.pairs),
                         "rt_total": sum(out.timings.values()), **out.timings})
        last = out
    timings = {k: float(np.mean([r[k] for r in per_seed])) for k in last.timings}

    def mean(key):
        vals = [r[key] for r in per_seed]
        return None if vals[0] is None else float(np.mean(vals))

    report = RunReport(
        dataset=ds.name, schema=str(setting), method=cfg.method.value, config=cfg.to_dict(),
        pc=mean("pc"), pq=mean("pq"), candidates=int(round(np.mean([r["candidates"] for r in per_seed]))),
        rt_total=float(sum(timings.values())), timings=timings,
        seeds=list(seeds) if cfg.method.stochastic else [],
        per_seed=per_seed if cfg.method.stochastic else [], diagnostics=last.diagnostics,
    )
    return report, (last.pairs if keep_pairs else None)
