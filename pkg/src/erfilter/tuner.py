"""Grid search for the configuration that maximizes PQ subject to PC >= tau.

Each method family has a configuration space mirroring its published domain.
A space is a Cartesian grid of outer axes, an optional *scan* axis traversed
with early termination, and (for blocking) an *inner* axis evaluated at every
scan step:

* blocking: the scan axis is the Block Filtering ratio, descending from 1.0;
  a group stops as soon as the recall of the filtered blocks drops below tau,
  because no comparison-cleaning step can recover a lost pair;
* epsilon-join: thresholds descend from 1.00 and the first one reaching tau
  ends the group (recall only grows as the threshold falls);
* kNN-join and flat kNN: K ascends and the first K reaching tau ends the group.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import blockrefine as br
from .blockbuild import build_blocks
from .core import ConfigError, PairArray, pair_completeness, pairs_quality
from .ingest import SchemaSetting
from .joins import InvertedIndex, similarities, top_k_distinct
from .methods import (
    Dataset,
    Family,
    FilterConfig,
    Method,
    _block_text,
    _clean,
    evaluate,
    baseline_dbw,
    baseline_dknn,
    baseline_pbw,
)
from .representation import ALL_MODELS, Measure, tokenize

__all__ = [
    "Axis", "ConfigSpace", "TargetRecall", "TuneResult", "SearchOutcome", "space_for",
    "grid_search", "full_scan", "select_best", "stochastic_mean", "load_space",
    "write_trace_csv", "write_trace_json", "baseline_pbw", "baseline_dbw", "baseline_dknn",
]

PC_EPS = 1e-12


@dataclass(frozen=True)
class TargetRecall:
    tau: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must be in (0, 1], got {self.tau}")

    def met(self, pc: float) -> bool:
        return pc >= self.tau - PC_EPS


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ConfigError(f"axis {self.name!r} is empty")


def _expand(assign: dict) -> dict:
    """Split combined keys such as ``pa+ws`` into their components."""
    out = {}
    for k, v in assign.items():
        if "+" in k:
            out.update(zip(k.split("+"), v))
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class ConfigSpace:
    method: Method
    axes: tuple[Axis, ...] = ()
    scan: Axis | None = None
    inner: tuple[Axis, ...] = ()
    fixed: tuple[tuple[str, Any], ...] = ()

    @property
    def max_configs(self) -> int:
        n = math.prod(len(a.values) for a in self.axes + self.inner)
        return n * (len(self.scan.values) if self.scan else 1)

    def groups(self) -> list[dict]:
        names = [a.name for a in self.axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*(a.values for a in self.axes))]

    def inner_assignments(self) -> list[dict]:
        names = [a.name for a in self.inner]
        return [dict(zip(names, combo)) for combo in itertools.product(*(a.values for a in self.inner))]

    def make(self, group: dict, scan_value=None, inner: dict | None = None) -> FilterConfig:
        params = dict(self.fixed)
        params.update(_expand(group))
        if self.scan is not None:
            params.update(_expand({self.scan.name: scan_value}))
        params.update(_expand(inner or {}))
        return FilterConfig.of(self.method, **params)

    def configs(self) -> Iterable[FilterConfig]:
        """Every configuration, in traversal order."""
        scan_values = self.scan.values if self.scan else (None,)
        for g in self.groups():
            for s in scan_values:
                for inner in self.inner_assignments():
                    yield self.make(g, s, inner)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "axes": {a.name: list(a.values) for a in self.axes},
            "scan": {self.scan.name: list(self.scan.values)} if self.scan else None,
            "inner": {a.name: [list(v) if isinstance(v, tuple) else v for v in a.values] for a in self.inner},
            "fixed": dict(self.fixed),
        }


# -- published domains --------------------------------------------------------

BFR_VALUES = tuple(round(0.025 * i, 3) for i in range(40, 0, -1))
COMPARISON_CLEANING = (("CP", None),) + tuple(
    (pa.value, ws.value) for pa in br.PruneAlgo for ws in br.WeightScheme
)
EPS_VALUES = tuple(round(i / 100, 2) for i in range(100, 0, -1))
KNN_VALUES = tuple(range(1, 101))
FLAT_K_VALUES = tuple(range(1, 101)) + tuple(range(105, 1001, 5)) + tuple(range(1010, 5001, 10))
POW2_1_512 = tuple(2 ** n for n in range(10))
MINHASH_BANDS_ROWS = tuple(
    (b, p // b) for p in (128, 256, 512) for b in (2 ** n for n in range(1, 10)) if p // b >= 2
)
BOOL = (False, True)
MODELS = tuple(m.code for m in ALL_MODELS)
MEASURES = tuple(m.value for m in Measure)

_BLOCKING_BUILD_AXES = {
    Method.SBW: (),
    Method.QBW: (Axis("q", range(2, 7)),),
    Method.EQBW: (Axis("q", range(2, 7)), Axis("t", (0.8, 0.85, 0.9, 0.95))),
    Method.SABW: (Axis("lmin", range(2, 7)), Axis("bmax", range(2, 101))),
    Method.ESABW: (Axis("lmin", range(2, 7)), Axis("bmax", range(2, 101))),
}


def space_for(method: Method | str) -> ConfigSpace:
    """The full configuration space of a method family."""
    m = Method.parse(method) if isinstance(method, str) else method
    if m in _BLOCKING_BUILD_AXES:
        return ConfigSpace(m, _BLOCKING_BUILD_AXES[m] + (Axis("bp", BOOL),),
                           Axis("bfr", BFR_VALUES), (Axis("pa+ws", COMPARISON_CLEANING),))
    common = (Axis("cl", BOOL), Axis("sm", MEASURES), Axis("rm", MODELS))
    if m is Method.EPS_JOIN:
        return ConfigSpace(m, common, Axis("t", EPS_VALUES))
    if m is Method.KNN_JOIN:
        return ConfigSpace(m, common + (Axis("rvs", BOOL),), Axis("K", KNN_VALUES))
    if m is Method.EDIT_JOIN:
        return ConfigSpace(m, (Axis("cl", BOOL),))
    if m is Method.MH_LSH:
        return ConfigSpace(m, (Axis("cl", BOOL), Axis("k", range(2, 6)),
                               Axis("bands+rows", MINHASH_BANDS_ROWS)))
    if m is Method.HP_LSH:
        return ConfigSpace(m, (Axis("cl", BOOL), Axis("tables", POW2_1_512), Axis("hashes", range(1, 21))))
    if m is Method.CP_LSH:
        return ConfigSpace(m, (Axis("cl", BOOL), Axis("tables", POW2_1_512), Axis("hashes", range(1, 21)),
                               Axis("cp_dim", POW2_1_512)))
    if m is Method.FLAT_KNN:
        return ConfigSpace(m, (Axis("cl", BOOL), Axis("rvs", BOOL)), Axis("K", FLAT_K_VALUES))
    raise ConfigError(f"{m.value} is a fixed baseline and has no configuration space")


def load_space(path: str | Path) -> ConfigSpace:
    """Read a space from JSON: ``{"method", "axes", "scan", "inner", "fixed"}``.

    Axis values for combined keys (``pa+ws``, ``bands+rows``) are lists.
    """
    spec = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = set(spec) - {"method", "axes", "scan", "inner", "fixed"}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    m = Method.parse(spec["method"])

    def axes(d):
        return tuple(Axis(k, [tuple(x) if isinstance(x, list) else x for x in v]) for k, v in (d or {}).items())

    scan = axes(spec.get("scan"))
    if len(scan) > 1:
        raise ConfigError("at most one scan axis")
    space = ConfigSpace(m, axes(spec.get("axes")), scan[0] if scan else None, axes(spec.get("inner")),
                        tuple(sorted((spec.get("fixed") or {}).items())))
    next(iter(space.configs()))  # fail early on an invalid grid
    return space


# -- results ----------------------------------------------------------------


@dataclass
class TuneResult:
    config: FilterConfig
    pc: float
    pq: float
    candidates: int
    rt_total: float
    timings: dict[str, float] = field(default_factory=dict)
    seeds: int = 1
    per_seed: list[dict] = field(default_factory=list)

    def row(self) -> dict:
        out = {"config": str(self.config), "pc": self.pc, "pq": self.pq,
               "candidates": self.candidates, "rt_total": self.rt_total, "seeds": self.seeds}
        out.update(self.timings)
        return out


@dataclass
class SearchOutcome:
    space: ConfigSpace
    tau: float
    best: TuneResult | None
    reached: bool
    trace: list[TuneResult]
    degenerate: bool = False

    @property
    def status(self) -> str:
        return "ok" if self.reached else "target unreachable"


def select_best(results: Sequence[TuneResult], target: TargetRecall) -> tuple[TuneResult | None, bool]:
    """Max PQ among results meeting tau; ties go to fewer candidates, then to
    the result met first in traversal order (early termination only drops
    later ones, so the choice survives it). With none meeting tau, the
    highest-PC result and False."""
    ranked = list(enumerate(results))
    ok = [(i, r) for i, r in ranked if target.met(r.pc)]
    if ok:
        return min(ok, key=lambda x: (-x[1].pq, x[1].candidates, x[0]))[1], True
    if not results:
        return None, False
    return min(ranked, key=lambda x: (-x[1].pc, -x[1].pq, x[1].candidates, x[0]))[1], False


def _score(ds: Dataset, pairs: PairArray) -> tuple[float, float]:
    cs = pairs.to_candidate_set(ds.e1, ds.e2)
    return pair_completeness(cs, ds.gt), pairs_quality(cs, ds.gt)


# -- per-family group evaluators -----------------------------------------------


class _Context:
    """Rendered texts shared by every group of one search."""

    def __init__(self, ds: Dataset, setting: SchemaSetting):
        self.ds = ds
        self.setting = setting
        self.left, self.right = ds.texts(setting)
        self._block = None
        self._clean: dict[bool, tuple] = {}

    def block_texts(self):
        if self._block is None:
            self._block = ([_block_text(t) for t in self.left], [_block_text(t) for t in self.right])
        return self._block

    def cleaned(self, cl: bool):
        if cl not in self._clean:
            self._clean[cl] = (_clean(self.left, cl), _clean(self.right, cl))
        return self._clean[cl]


def _blocking_group(ctx: _Context, space: ConfigSpace, group: dict, target: TargetRecall,
                    exhaustive: bool) -> list[TuneResult]:
    ds = ctx.ds
    first = space.make(group, space.scan.values[0], space.inner_assignments()[0])
    build, refine0 = first.blocking()
    lt, rt = ctx.block_texts()
    t0 = time.perf_counter()
    bc = build_blocks(lt, rt, build)
    t_b = time.perf_counter() - t0
    t0 = time.perf_counter()
    if refine0.purge:
        bc = br.block_purging(bc)
    t_p = time.perf_counter() - t0 if refine0.purge else 0.0
    out = []
    for bfr in space.scan.values:
        t0 = time.perf_counter()
        fb = br.block_filtering(bc, bfr) if bfr < 1.0 - 1e-9 else bc
        t_f = time.perf_counter() - t0 if bfr < 1.0 - 1e-9 else 0.0
        if not exhaustive:
            upper, _ = _score(ds, br.comparison_propagation(fb))
            if not target.met(upper):
                break
        for inner in space.inner_assignments():
            cfg = space.make(group, bfr, inner)
            _, refine = cfg.blocking()
            t0 = time.perf_counter()
            pairs = br.clean_comparisons(fb, refine)
            t_c = time.perf_counter() - t0
            pc, pq = _score(ds, pairs)
            timings = {"t_b": t_b, "t_p": t_p, "t_f": t_f, "t_c": t_c}
            out.append(TuneResult(cfg, pc, pq, len(pairs), sum(timings.values()), timings))
    return out


def _join_group(ctx: _Context, space: ConfigSpace, group: dict, target: TargetRecall,
                exhaustive: bool) -> list[TuneResult]:
    """Epsilon and kNN joins: one ScanCount pass per group, then every scan
    value is a cheap mask over the cached similarities."""
    ds = ctx.ds
    probe = space.make(group, space.scan.values[0])
    measure, model = probe.join_settings()
    t0 = time.perf_counter()
    lt, rt = ctx.cleaned(probe.get("cl"))
    ls = [tokenize(t, model).tokens for t in lt]
    rs = [tokenize(t, model).tokens for t in rt]
    t_r = time.perf_counter() - t0
    reverse = probe.method is Method.KNN_JOIN and probe.get("rvs")
    indexed, queries = (rs, ls) if reverse else (ls, rs)
    t0 = time.perf_counter()
    index = InvertedIndex(indexed)
    per_query = []
    for q_idx, q in enumerate(queries):
        if not q:
            continue
        ov = index.overlaps(q)
        hit = np.flatnonzero(ov)
        if hit.size:
            per_query.append((q_idx, hit, similarities(measure, ov[hit], len(q), index.sizes[hit])))
    t_scan = time.perf_counter() - t0
    n1, n2 = len(ls), len(rs)
    out = []
    for value in space.scan.values:
        cfg = space.make(group, value)
        t0 = time.perf_counter()
        codes = []
        for q_idx, hit, sims in per_query:
            if cfg.method is Method.EPS_JOIN:
                chosen = hit[sims >= value - 1e-12]
            else:
                chosen = hit[top_k_distinct(sims, value)]
            if reverse:
                codes.append(q_idx * n2 + chosen)
            else:
                codes.append(chosen * n2 + q_idx)
        pairs = PairArray.from_codes(np.concatenate(codes) if codes else np.zeros(0, np.int64), n1, n2)
        timings = {"t_r": t_r, "t_i": 0.0, "t_q": t_scan + time.perf_counter() - t0}
        pc, pq = _score(ds, pairs)
        out.append(TuneResult(cfg, pc, pq, len(pairs), sum(timings.values()), timings))
        if not exhaustive and target.met(pc):
            break
    return out


def stochastic_mean(ds: Dataset, cfg: FilterConfig, setting: SchemaSetting,
                    repetitions: int = 10, seeds: Sequence[int] | None = None) -> TuneResult:
    """PC/PQ/RT averaged over seeded runs; per-seed values are kept."""
    seeds = list(range(repetitions)) if seeds is None else list(seeds)
    report, _ = evaluate(ds, cfg, setting, seeds)
    return TuneResult(cfg, report.pc, report.pq, report.candidates, report.rt_total, report.timings,
                      len(seeds) if cfg.method.stochastic else 1, report.per_seed)


def _generic_group(ctx: _Context, space: ConfigSpace, group: dict, target: TargetRecall,
                   exhaustive: bool, seeds: Sequence[int] | None) -> list[TuneResult]:
    out = []
    for value in (space.scan.values if space.scan else (None,)):
        cfg = space.make(group, value)
        r = stochastic_mean(ctx.ds, cfg, ctx.setting, seeds=seeds)
        out.append(r)
        if space.scan is not None and not exhaustive and target.met(r.pc):
            break
    return out


def _run(ds: Dataset, space: ConfigSpace, setting: SchemaSetting, target: TargetRecall,
         exhaustive: bool, threads: int, seeds: Sequence[int] | None) -> SearchOutcome:
    if ds.gt is None:
        raise ConfigError("tuning needs a ground truth")
    ctx = _Context(ds, setting)
    fam = space.method.family
    if fam is Family.BLOCKING and space.scan is not None and space.scan.name == "bfr":
        def job(g):
            return _blocking_group(ctx, space, g, target, exhaustive)
    elif space.method in (Method.EPS_JOIN, Method.KNN_JOIN) and space.scan is not None:
        def job(g):
            return _join_group(ctx, space, g, target, exhaustive)
    else:
        def job(g):
            return _generic_group(ctx, space, g, target, exhaustive, seeds)
    groups = space.groups()
    if threads > 1:
        # shared lazy caches are filled up front so workers only read them
        ctx.block_texts() if fam is Family.BLOCKING else None
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(job, groups))
    else:
        chunks = [job(g) for g in groups]
    # results are ordered by group then traversal step, independent of scheduling
    trace = [r for chunk in chunks for r in chunk]
    best, reached = select_best(trace, target)
    degenerate = bool(best is not None and best.candidates == len(ds.e1) * len(ds.e2))
    if degenerate:
        warnings.warn(f"winning configuration {best.config} keeps the whole Cartesian product")
    return SearchOutcome(space, target.tau, best, reached, trace, degenerate)


def grid_search(ds: Dataset, space: ConfigSpace, setting: SchemaSetting = SchemaSetting(),
                target: TargetRecall = TargetRecall(), *, threads: int = 1,
                seeds: Sequence[int] | None = None) -> SearchOutcome:
    """Best configuration under the recall constraint, with early termination."""
    return _run(ds, space, setting, target, False, threads, seeds)


def full_scan(ds: Dataset, space: ConfigSpace, setting: SchemaSetting = SchemaSetting(),
              target: TargetRecall = TargetRecall(), *, threads: int = 1,
              seeds: Sequence[int] | None = None) -> SearchOutcome:
    """Evaluate every configuration; the reference for ``grid_search``."""
    return _run(ds, space, setting, target, True, threads, seeds)


# -- trace output -------------------------------------------------------------


TRACE_COLUMNS = ("config", "pc", "pq", "candidates", "rt_total", "seeds",
                 "t_b", "t_p", "t_f", "t_c", "t_r", "t_i", "t_q")


def write_trace_csv(outcome: SearchOutcome, path: str | Path) -> None:
    cols = list(TRACE_COLUMNS)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in outcome.trace:
            row = {c: 0.0 for c in cols}
            row.update(r.row())
            w.writerow(row)


def write_trace_json(outcome: SearchOutcome, path: str | Path) -> None:
    doc = {
        "space": outcome.space.to_dict(),
        "tau": outcome.tau,
        "status": outcome.status,
        "degenerate": outcome.degenerate,
        "best": None if outcome.best is None else {**outcome.best.row(), "params": outcome.best.config.to_dict()},
        "trace": [{**r.row(), "params": r.config.to_dict(), "per_seed": r.per_seed} for r in outcome.trace],
    }
    Path(path).write_text(json.dumps(doc, indent=2, default=str), encoding="utf-8")
