"""Acceptance criteria, one test each. Every test prints a single status line.

Criteria 1-4 and 8 need the public restaurants and DBLP-ACM datasets under
$ERFILTER_DATA; without them they are reported as NOT RUN and skipped.
"""

import itertools
import math
import time

import numpy as np
import pytest

from erfilter.blockbuild import BlockBuildConfig, BuildMethod, build_blocks
from erfilter.blockrefine import PruneAlgo, WeightScheme, comparison_propagation, prune, weigh
from erfilter.core import (
    CandidatePair,
    CandidateSet,
    EmptyGroundTruthError,
    GroundTruth,
    pair_completeness,
    pairs_quality,
)
from erfilter.datasets import REFERENCE_ROWS, available, load_dataset
from erfilter.ingest import SchemaSetting
from erfilter.joins import epsilon_join, knn_join
from erfilter.methods import FilterConfig, baseline_dbw, baseline_pbw, evaluate
from erfilter.nnsearch import CrossPolytopeHasher, HyperplaneHasher, MinHasher, flat_knn
from erfilter.representation import Measure
from erfilter.synth import make_dataset
from erfilter.tuner import Axis, ConfigSpace, TargetRecall, full_scan, grid_search
from erfilter.methods import Method
from conftest import ACCEPTANCE_LINES
from oracles import (
    oracle_block_pairs,
    oracle_cp,
    oracle_eps_join,
    oracle_flat_knn,
    oracle_knn_join,
    oracle_prune,
    oracle_weights,
    unit_rows,
)

AGN = SchemaSetting.agnostic()


def verdict(n, ok, detail):
    line = f"acceptance {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)
    assert ok, detail


def need(n, *names):
    missing = [d for d in names if not available(d)]
    if missing:
        line = f"acceptance {n}: NOT RUN (dataset missing: {', '.join(missing)})"
        ACCEPTANCE_LINES.append(line)
        print("\n" + line)
        pytest.skip(f"dataset missing: {missing}")


def based(ds, name):
    """Schema-based setting on the attribute whose name matches ``name`` case-insensitively."""
    attrs = {a for p in list(ds.e1) + list(ds.e2) for a, _ in p.pairs}
    hit = [a for a in attrs if a.lower() == name.lower()]
    return SchemaSetting.based(hit[0] if hit else name)


def timed(ds, cfg, setting):
    t0 = time.perf_counter()
    report, _ = evaluate(ds, cfg, setting)
    return report, time.perf_counter() - t0


# -- dataset regressions --------------------------------------------------------


def test_criterion_1_pbw_restaurants():
    need(1, "restaurants")
    ds = load_dataset("restaurants")
    r, wall = timed(ds, baseline_pbw(), AGN)
    ok = r.pc == 1.0 and abs(r.pq - 0.307) <= 0.05 and wall < 5.0
    verdict(1, ok, f"PBW D1 PC={r.pc:.3f} (1.000) PQ={r.pq:.3f} (0.307+-0.05) time={wall:.2f}s (<5)")


def test_criterion_2_dbw_dblp_acm():
    need(2, "dblp-acm")
    ds = load_dataset("dblp-acm")
    r, _ = timed(ds, baseline_dbw(), AGN)
    ok = r.pc >= 0.95 and abs(r.pq - 0.042) <= 0.02
    verdict(2, ok, f"DBW D4 PC={r.pc:.3f} (>=0.95) PQ={r.pq:.3f} (0.042+-0.02)")


def test_criterion_3_knn_join_dblp_acm():
    need(3, "dblp-acm")
    ds = load_dataset("dblp-acm")
    cfg = FilterConfig.of("knn-join", cl=False, rm="C3G", sm="cosine", K=1, rvs=False)
    r, wall = timed(ds, cfg, based(ds, "Title"))
    ok = abs(r.pc - 0.994) <= 0.01 and abs(r.pq - 0.836) <= 0.05 and wall < 10.0
    verdict(3, ok, f"kNN-Join D4/Title PC={r.pc:.3f} (0.994+-0.01) PQ={r.pq:.3f} (0.836+-0.05) "
                   f"time={wall:.2f}s (<10)")


def test_criterion_4_eps_join_dblp_acm():
    need(4, "dblp-acm")
    ds = load_dataset("dblp-acm")
    cfg = FilterConfig.of("eps-join", cl=False, rm="T1G", sm="cosine", t=1.0)
    r, _ = timed(ds, cfg, based(ds, "Title"))
    ok = abs(r.pc - 0.913) <= 0.01 and abs(r.pq - 0.886) <= 0.05
    verdict(4, ok, f"eps-Join D4/Title PC={r.pc:.3f} (0.913+-0.01) PQ={r.pq:.3f} (0.886+-0.05)")


def test_criterion_8_best_blocking_rows():
    need(8, "restaurants", "dblp-acm")
    bad, seen = [], 0
    for name in ("restaurants", "dblp-acm"):
        ds = load_dataset(name)
        for method in ("sbw", "qbw", "eqbw", "sabw", "esabw"):
            params, pc_ref, _ = REFERENCE_ROWS[(name, "agnostic")][method]
            r, _ = timed(ds, FilterConfig.of(method, **params), AGN)
            seen += 1
            if abs(r.pc - pc_ref) > 0.02:
                bad.append(f"{name}/{method} PC={r.pc:.3f} vs {pc_ref:.3f}")
    verdict(8, not bad, f"{seen - len(bad)}/{seen} best blocking rows within +-0.02 PC"
                        + (f"; off: {'; '.join(bad)}" if bad else ""))


# -- oracle equivalence -----------------------------------------------------------


def _texts(rng, n, vocab):
    return [" ".join(rng.choice(vocab, size=int(rng.integers(0, 5)))) for _ in range(n)]


def _vocab(rng, size, alphabet="abcdef", max_len=6):
    return ["".join(rng.choice(list(alphabet), size=int(rng.integers(1, max_len + 1)))) for _ in range(size)]


def _sizes(rng):
    # mostly small instances, some up to the 100 x 100 bound
    if rng.random() < 0.2:
        return int(rng.integers(50, 101)), int(rng.integers(50, 101))
    return int(rng.integers(1, 30)), int(rng.integers(1, 30))


BUILDERS = [
    (BuildMethod.STANDARD, {}),
    (BuildMethod.QGRAMS, {"q": 2}),
    (BuildMethod.QGRAMS, {"q": 3}),
    (BuildMethod.EXTENDED_QGRAMS, {"q": 2, "t": 0.8}),
    (BuildMethod.EXTENDED_QGRAMS, {"q": 3, "t": 0.9}),
    (BuildMethod.SUFFIX_ARRAYS, {"l_min": 2, "b_max": 6}),
    (BuildMethod.EXTENDED_SUFFIX_ARRAYS, {"l_min": 3, "b_max": 8}),
]


def test_criterion_5_oracle_equivalence():
    rng = np.random.default_rng(20240501)
    n_inst = 210
    mismatches = {k: 0 for k in "abcde"}
    for inst in range(n_inst):
        n1, n2 = _sizes(rng)
        vocab = _vocab(rng, int(rng.integers(5, 40)))
        left, right = _texts(rng, n1, vocab), _texts(rng, n2, vocab)

        # (a) block building vs key intersection
        method, kw = BUILDERS[inst % len(BUILDERS)]
        bc = build_blocks(left, right, BlockBuildConfig(method, **kw))
        if bc.pairs() != oracle_block_pairs(left, right, method.value, kw.get("q"), kw.get("t"),
                                            kw.get("l_min"), kw.get("b_max")):
            mismatches["a"] += 1

        # (d) comparison propagation vs set dedup
        if comparison_propagation(bc).as_set() != oracle_cp(bc.blocks):
            mismatches["d"] += 1

        # (e) pruning vs verbatim rules (weights recomputed naively too)
        sbc = build_blocks(left, right, BlockBuildConfig())
        algo = list(PruneAlgo)[inst % len(PruneAlgo)]
        scheme = list(WeightScheme)[(inst // len(PruneAlgo)) % len(WeightScheme)]
        w = oracle_weights(sbc.blocks, n1, n2, scheme.value)
        want = oracle_prune(w, algo.value, n1, n2, sbc.total_assignments)
        if prune(weigh(sbc, scheme), algo).as_set() != want:
            mismatches["e"] += 1

        # (b) ScanCount joins vs quadratic oracles
        ls = [frozenset(t.split()) for t in left]
        rs = [frozenset(t.split()) for t in right]
        measure = list(Measure)[inst % 3]
        t = float(rng.choice([0.1, 0.25, 0.5, 2 / 3, 0.9, 1.0]))
        k = int(rng.integers(1, 6))
        rev = bool(rng.integers(0, 2))
        if epsilon_join(ls, rs, measure, t).as_set() != oracle_eps_join(ls, rs, measure.value, t):
            mismatches["b"] += 1
        if knn_join(ls, rs, measure, k, rev).as_set() != oracle_knn_join(ls, rs, measure.value, k, rev):
            mismatches["b"] += 1

        # (c) flat kNN vs distance matrix
        a, b = unit_rows(rng, n1, 8), unit_rows(rng, n2, 8)
        if flat_knn(a, b, k, rev).as_set() != oracle_flat_knn(a, b, k, rev):
            mismatches["c"] += 1
    ok = not any(mismatches.values())
    verdict(5, ok, f"{n_inst} random instances (<=100x100), mismatches per part {mismatches}")


# -- statistical LSH suite ------------------------------------------------------------


def _angle_pair(rng, dim, alpha):
    u = rng.normal(size=dim)
    u /= np.linalg.norm(u)
    w = rng.normal(size=dim)
    w -= (w @ u) * u
    w /= np.linalg.norm(w)
    return u, math.cos(alpha) * u + math.sin(alpha) * w


def test_criterion_6_statistical_lsh():
    t0 = time.perf_counter()
    rng = np.random.default_rng(12345)
    notes = []

    # MinHash: per-position agreement over 512 hashes vs exact Jaccard
    hasher = MinHasher(512, seed=12345)
    universe = np.array([f"x{i}" for i in range(1000)])
    worst_mh, mh_out = 0.0, 0
    for _ in range(100):
        na, nb = int(rng.integers(20, 200)), int(rng.integers(20, 200))
        shared = int(rng.integers(1, min(na, nb)))
        pick = rng.permutation(universe)[: na + nb - shared]
        a, b = set(pick[:na]), set(pick[na - shared:])
        j = len(a & b) / len(a | b)
        rate = float(np.mean(hasher.signature(a) == hasher.signature(b)))
        z = abs(rate - j) / math.sqrt(j * (1 - j) / 512)
        worst_mh = max(worst_mh, z)
        mh_out += z > 3
    notes.append(f"MinHash max|z|={worst_mh:.2f} outside3sd={mh_out}/100")

    # hyperplane: per-bit collision over 10,000 directions vs 1 - alpha/pi
    dim = 32
    hp = HyperplaneHasher(dim, tables=1, hashes=10000, seed=12345)
    worst_hp, hp_out = 0.0, 0
    for alpha in np.linspace(0.05, math.pi - 0.05, 20):
        u, v = _angle_pair(rng, dim, alpha)
        keys = hp.keys(np.stack([u, v]))
        rate = float(np.mean(keys[0] == keys[1]))
        p = 1 - alpha / math.pi
        z = abs(rate - p) / math.sqrt(p * (1 - p) / 10000)
        worst_hp = max(worst_hp, z)
        hp_out += z > 3
    notes.append(f"hyperplane max|z|={worst_hp:.2f} outside3sd={hp_out}/20")

    # cross-polytope: collision rate falls as the angle grows
    cp = CrossPolytopeHasher(64, tables=1, hashes=4000, cp_dimension=64, seed=12345)
    rates = []
    for alpha in np.linspace(0.1, math.pi / 2, 8):
        u, v = _angle_pair(rng, 64, alpha)
        keys = cp.keys(np.stack([u, v]))
        rates.append(float(np.mean(keys[0] == keys[1])))
    mono = all(x > y for x, y in zip(rates, rates[1:]))
    notes.append("cross-polytope rates " + " ".join(f"{r:.3f}" for r in rates))
    wall = time.perf_counter() - t0
    ok = mh_out == 0 and hp_out == 0 and mono and wall < 60
    verdict(6, ok, "; ".join(notes) + f"; time={wall:.1f}s (<60)")


# -- tuner ------------------------------------------------------------------------------


def test_criterion_7_tuner_early_termination():
    ds = make_dataset(80, 120, 40, noise=0.4, seed=7)
    spaces = [
        ConfigSpace(Method.QBW, (Axis("q", (2, 3)), Axis("bp", (False, True))),
                    Axis("bfr", (1.0, 0.75, 0.5, 0.25, 0.1)),
                    (Axis("pa+ws", (("CP", None), ("WEP", "CBS"), ("RCNP", "JS"))),)),
        ConfigSpace(Method.EPS_JOIN, (Axis("rm", ("T1G", "C3G")), Axis("sm", ("cosine", "jaccard"))),
                    Axis("t", tuple(round(1 - 0.05 * i, 2) for i in range(20)))),
        ConfigSpace(Method.KNN_JOIN, (Axis("rm", ("T1G", "C2G")), Axis("rvs", (False, True))),
                    Axis("K", tuple(range(1, 21)))),
    ]
    checked, bad = 0, []
    for sp in spaces:
        assert sp.max_configs <= 100
        for tau in (0.5, 0.8, 0.9, 0.95, 1.0):
            fast = grid_search(ds, sp, AGN, TargetRecall(tau))
            slow = full_scan(ds, sp, AGN, TargetRecall(tau))
            checked += 1
            any_meets = any(r.pc >= tau - 1e-12 for r in slow.trace)
            same = fast.best.config == slow.best.config
            sound = (not any_meets) or (fast.reached and fast.best.pc >= tau - 1e-12)
            if not (same and sound):
                bad.append(f"{sp.method.value} tau={tau}: {fast.best.config} vs {slow.best.config}")
    verdict(7, not bad, f"{checked} (space, tau) cases, early-terminated winner equals full scan"
                        + (f"; differ: {bad}" if bad else ""))


# -- metrics ---------------------------------------------------------------------------


def _partial_matchings(n1, n2):
    for k in range(1, min(n1, n2) + 1):
        for lefts in itertools.combinations(range(n1), k):
            for rights in itertools.permutations(range(n2), k):
                yield frozenset(zip(lefts, rights))


def _as_set(pairs):
    return CandidateSet(frozenset(CandidatePair(f"a{i}", f"b{j}") for i, j in pairs))


def _as_gt(pairs):
    return GroundTruth(frozenset(CandidatePair(f"a{i}", f"b{j}") for i, j in pairs))


def test_criterion_9_metric_micro_instances():
    rng = np.random.default_rng(9)
    checks = 0
    failures = []
    for n1 in range(1, 6):
        for n2 in range(1, 6):
            cells = list(itertools.product(range(n1), range(n2)))
            if len(cells) <= 9:
                cand_sets = [frozenset(c) for r in range(len(cells) + 1) for c in itertools.combinations(cells, r)]
            else:
                # all sets up to size 2 and their complements, plus random ones
                cand_sets = [frozenset(c) for r in range(3) for c in itertools.combinations(cells, r)]
                cand_sets += [frozenset(cells) - c for c in list(cand_sets)]
                cand_sets += [frozenset(c for c in cells if rng.random() < 0.5) for _ in range(200)]
            gts = list(_partial_matchings(n1, n2))
            if len(gts) > 60:
                gts = [gts[i] for i in rng.choice(len(gts), 60, replace=False)]
            for g in gts:
                gt = _as_gt(g)
                for c in cand_sets:
                    cs = _as_set(c)
                    pc, pq = pair_completeness(cs, gt), pairs_quality(cs, gt)
                    hit = len(c & g)
                    checks += 1
                    if pc != hit / len(g) or pq != (hit / len(c) if c else 0.0):
                        failures.append(("formula", n1, n2, sorted(c), sorted(g)))
                    if (pc == 1.0) != (g <= c):
                        failures.append(("pc=1 iff gt covered", sorted(c), sorted(g)))
                    extra = next((x for x in cells if x not in c), None)
                    if extra is not None:
                        if pair_completeness(_as_set(c | {extra}), gt) < pc:
                            failures.append(("monotone", sorted(c), extra, sorted(g)))
    try:
        pair_completeness(_as_set({(0, 0)}), GroundTruth(frozenset()))
        failures.append(("empty gt did not raise",))
    except EmptyGroundTruthError:
        pass
    if pairs_quality(CandidateSet(frozenset()), _as_gt({(0, 0)})) != 0.0:
        failures.append(("empty candidates PQ != 0",))
    verdict(9, not failures, f"{checks} (candidates, ground truth) micro-instances up to 5x5; "
                             f"{len(failures)} failures" + (f", first {failures[0]}" if failures else ""))
