import itertools
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from erfilter.core import (
    CandidatePair,
    CandidateSet,
    DataError,
    DuplicateIdError,
    EmptyGroundTruthError,
    EntityCollection,
    EntityProfile,
    GroundTruth,
    PairArray,
    UnknownIdError,
    dedupe,
    pair_completeness,
    pairs_quality,
)
from oracles import oracle_metrics


def coll(label, n, prefix):
    return EntityCollection(label, tuple(EntityProfile(f"{prefix}{i}", (("name", f"v{i}"),)) for i in range(n)))


def cs(pairs):
    return CandidateSet(frozenset(CandidatePair(*p) for p in pairs))


def gt(pairs):
    return GroundTruth(frozenset(CandidatePair(*p) for p in pairs))


def test_pc_nine_of_ten():
    truth = gt([(f"a{i}", f"b{i}") for i in range(10)])
    assert pair_completeness(cs([(f"a{i}", f"b{i}") for i in range(9)]), truth) == pytest.approx(0.9)


def test_pq_nine_in_ninety():
    truth = gt([(f"a{i}", f"b{i}") for i in range(10)])
    cand = [(f"a{i}", f"b{i}") for i in range(9)] + [(f"x{i}", "y") for i in range(81)]
    assert pairs_quality(cs(cand), truth) == pytest.approx(0.1)


def test_identity_scores_one():
    truth = gt([("a", "x"), ("b", "y")])
    c = CandidateSet(truth.matches)
    assert pair_completeness(c, truth) == 1.0
    assert pairs_quality(c, truth) == 1.0


def test_empty_candidates_pq_zero():
    assert pairs_quality(cs([]), gt([("a", "x")])) == 0.0


def test_empty_ground_truth_pc_raises():
    with pytest.raises(EmptyGroundTruthError):
        pair_completeness(cs([("a", "x")]), gt([]))


def test_dedupe_examples():
    assert dedupe([("a", "x"), ("a", "x"), ("b", "y")]).pairs == {("a", "x"), ("b", "y")}
    assert len(dedupe([])) == 0


def test_dedupe_orients_and_rejects_unknown():
    e1, e2 = coll("E1", 3, "a"), coll("E2", 3, "b")
    assert dedupe([("b1", "a0")], e1, e2).pairs == {("a0", "b1")}
    with pytest.raises(UnknownIdError) as err:
        dedupe([("a0", "zz")], e1, e2)
    assert "zz" in err.value.offenders


def test_dedupe_large_against_sort_unique():
    rng = random.Random(7)
    base = [(f"a{rng.randrange(5000)}", f"b{rng.randrange(5000)}") for _ in range(90_000)]
    pairs = base + rng.sample(base, 10_000)
    rng.shuffle(pairs)
    ordered = sorted(pairs)
    unique = [p for k, p in enumerate(ordered) if k == 0 or p != ordered[k - 1]]
    assert len(dedupe(pairs)) == len(unique)


def test_duplicate_ids_rejected():
    with pytest.raises(DuplicateIdError):
        EntityCollection("E", (EntityProfile("a"), EntityProfile("a")))


def test_empty_id_rejected():
    with pytest.raises(DataError):
        EntityProfile("")


def test_repeated_attribute_names_allowed():
    p = EntityProfile("a", (("author", "x"), ("author", "y"), ("title", "")))
    assert p.values("author") == ["x", "y"]
    assert p.values("title") == [""]


def test_groundtruth_validation():
    e1, e2 = coll("E1", 2, "a"), coll("E2", 2, "b")
    gt([("a0", "b0")]).validate(e1, e2)
    with pytest.raises(UnknownIdError):
        gt([("a0", "q")]).validate(e1, e2)
    with pytest.raises(DataError):
        gt([("a0", "b0"), ("a0", "b1")]).validate(e1, e2)
    gt([("a0", "b0"), ("a0", "b1")]).validate(e1, e2, clean_clean=False)


def test_pair_array_roundtrip():
    e1, e2 = coll("E1", 3, "a"), coll("E2", 4, "b")
    pa = PairArray.from_codes(np.array([5, 1, 5, 11]), 3, 4)
    assert pa.as_set() == {(0, 1), (1, 1), (2, 3)}
    assert pa.to_candidate_set(e1, e2).pairs == {("a0", "b1"), ("a1", "b1"), ("a2", "b3")}


def test_cartesian_pq():
    e1, e2 = coll("E1", 4, "a"), coll("E2", 5, "b")
    truth = gt([("a0", "b0"), ("a1", "b3"), ("a3", "b4")])
    full = cs(itertools.product(e1.ids, e2.ids))
    assert pairs_quality(full, truth) == pytest.approx(len(truth) / (4 * 5))


ids = st.tuples(st.integers(0, 6), st.integers(0, 6)).map(lambda t: (f"a{t[0]}", f"b{t[1]}"))


@given(st.lists(ids, max_size=30), st.lists(ids, min_size=1, max_size=10))
def test_metrics_match_brute_force(cand, truth_pairs):
    truth = gt(truth_pairs)
    pc, pq = oracle_metrics(set(cand), truth.matches)
    assert pair_completeness(dedupe(cand), truth) == pytest.approx(pc)
    assert pairs_quality(dedupe(cand), truth) == pytest.approx(pq)
    assert 0.0 <= pc <= 1.0 and 0.0 <= pq <= 1.0


@given(st.lists(ids, max_size=30), st.lists(ids, max_size=30), st.lists(ids, min_size=1, max_size=10))
def test_pc_monotone_under_union(a, b, truth_pairs):
    truth = gt(truth_pairs)
    ca, cb = dedupe(a), dedupe(b)
    assert pair_completeness(ca.union(cb), truth) >= pair_completeness(ca, truth)


@given(st.lists(ids, max_size=30), st.lists(ids, min_size=1, max_size=10), st.randoms())
def test_pc_invariant_under_permutation_and_duplication(cand, truth_pairs, rnd):
    truth = gt(truth_pairs)
    shuffled = cand + cand[: len(cand) // 2]
    rnd.shuffle(shuffled)
    assert pair_completeness(dedupe(shuffled), truth) == pair_completeness(dedupe(cand), truth)
