import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from erfilter.blockbuild import Block, BlockBuildConfig, BlockCollection, BuildMethod, build_blocks
from erfilter.blockrefine import (
    DBW_BUILD,
    DBW_REFINE,
    PBW_BUILD,
    PBW_REFINE,
    PruneAlgo,
    RefineConfig,
    WeightedPairs,
    WeightScheme,
    block_filtering,
    block_purging,
    comparison_propagation,
    metablocking,
    prune,
    run_blocking_workflow,
    weigh,
)
from erfilter.core import ConfigError
from oracles import oracle_cp, oracle_filtering, oracle_prune, oracle_weights


@st.composite
def collections(draw, max_left=6, max_right=6, max_blocks=8):
    nl = draw(st.integers(1, max_left))
    nr = draw(st.integers(1, max_right))
    nb = draw(st.integers(0, max_blocks))
    blocks = []
    for k in range(nb):
        left = draw(st.sets(st.integers(0, nl - 1), min_size=1))
        right = draw(st.sets(st.integers(0, nr - 1), min_size=1))
        blocks.append(Block(f"k{k:02d}", tuple(sorted(left)), tuple(sorted(right))))
    return BlockCollection(tuple(blocks), nl, nr)


@given(collections())
def test_cp_matches_oracle(bc):
    assert comparison_propagation(bc).as_set() == oracle_cp(bc.blocks)


@given(collections())
def test_purging_rule(bc):
    out = block_purging(bc)
    limit = 0.5 * min(bc.n_left, bc.n_right)
    assert [b.key for b in out] == [b.key for b in bc if b.entities <= limit]


@given(collections(), st.sampled_from([0.025, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]))
def test_filtering_matches_oracle(bc, ratio):
    out = block_filtering(bc, ratio)
    assert [(b.key, b.left, b.right) for b in out] == oracle_filtering(bc.blocks, ratio)


@given(collections(), st.sampled_from([0.1, 0.3, 0.5, 0.8]))
def test_filtering_smaller_ratio_keeps_subset(bc, ratio):
    assert comparison_propagation(block_filtering(bc, ratio)).as_set() <= oracle_cp(bc.blocks)
    smaller = comparison_propagation(block_filtering(bc, ratio / 2)).as_set()
    assert smaller <= comparison_propagation(block_filtering(bc, ratio)).as_set()


@pytest.mark.parametrize("scheme", list(WeightScheme), ids=lambda s: s.value)
@given(bc=collections())
def test_weights_match_oracle(scheme, bc):
    wp = weigh(bc, scheme)
    got = {(int(i), int(j)): float(w) for i, j, w in zip(wp.rows, wp.cols, wp.weights)}
    want = oracle_weights(bc.blocks, bc.n_left, bc.n_right, scheme.value)
    assert set(got) == set(want)
    for p in want:
        assert got[p] == pytest.approx(want[p], rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("algo", list(PruneAlgo), ids=lambda a: a.value)
@given(bc=collections(), scheme=st.sampled_from(list(WeightScheme)))
def test_pruning_matches_oracle(algo, bc, scheme):
    wp = weigh(bc, scheme)
    w = {(int(i), int(j)): float(x) for i, j, x in zip(wp.rows, wp.cols, wp.weights)}
    got = prune(wp, algo).as_set()
    assert got == oracle_prune(w, algo.value, bc.n_left, bc.n_right, bc.total_assignments)
    # pruning never adds comparisons
    assert got <= oracle_cp(bc.blocks)


def test_rcnp_keeps_mutual_best_only():
    # k = max(1, 4 // 4) = 1; e0 and e1 both prefer f0, f0 prefers e0, f1 prefers e1
    wp = WeightedPairs(np.array([0, 1, 1]), np.array([0, 0, 1]), np.array([3.0, 2.0, 1.0]), 2, 2, 4)
    assert prune(wp, PruneAlgo.RCNP).as_set() == {(0, 0)}
    assert prune(wp, PruneAlgo.CNP).as_set() == {(0, 0), (1, 0), (1, 1)}


def test_refine_config_validation():
    with pytest.raises(ConfigError):
        RefineConfig(filter_ratio=0.01)
    with pytest.raises(ConfigError):
        RefineConfig(scheme=WeightScheme.CBS)
    assert RefineConfig(filter_ratio=1.0).filtering is False


def test_workflow_timings_and_baselines():
    left = ["joe biden", "donald trump", "barack obama", "george bush"]
    right = ["biden joe", "trump donald j", "obama", "bush george w", "kamala harris"]
    res = run_blocking_workflow(left, right, PBW_BUILD, PBW_REFINE)
    assert set(res.timings) == {"t_b", "t_p", "t_f", "t_c"}
    assert res.timings["t_f"] == 0.0
    assert res.pairs.as_set() == {(0, 0), (1, 1), (2, 2), (3, 3)}
    res = run_blocking_workflow(left, right, DBW_BUILD, DBW_REFINE)
    assert res.pairs.as_set() <= {(i, j) for i in range(4) for j in range(5)}


def test_workflow_equals_manual_composition():
    rng = np.random.default_rng(0)
    vocab = [f"w{i}" for i in range(30)]
    left = [" ".join(rng.choice(vocab, 4)) for _ in range(40)]
    right = [" ".join(rng.choice(vocab, 4)) for _ in range(50)]
    build = BlockBuildConfig(BuildMethod.QGRAMS, q=2)
    refine = RefineConfig(purge=True, filter_ratio=0.5, scheme=WeightScheme.JS, algo=PruneAlgo.WNP)
    res = run_blocking_workflow(left, right, build, refine)
    bc = block_filtering(block_purging(build_blocks(left, right, build)), 0.5)
    assert res.pairs.as_set() == metablocking(bc, WeightScheme.JS, PruneAlgo.WNP).as_set()
