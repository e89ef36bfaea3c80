import pytest
from hypothesis import given
from hypothesis import strategies as st

from erfilter.blockbuild import (
    BlockBuildConfig,
    BuildMethod,
    build_blocks,
    keys_extended_qgrams,
    keys_extended_suffix,
    keys_qgrams,
    keys_standard,
    keys_suffix,
)
from erfilter.core import ConfigError
from oracles import oracle_block_pairs, oracle_keys


def test_joe_biden_keys():
    s = "joe biden"
    assert keys_standard(s) == {"joe", "biden"}
    assert keys_qgrams(s, 3) == {"joe", "bid", "ide", "den"}
    assert keys_extended_qgrams(s, 3, 0.8) == {"joe", "bid_ide", "bid_den", "ide_den", "bid_ide_den"}
    assert keys_suffix(s, 2) == {"oe", "joe", "en", "den", "iden", "biden"}
    assert keys_extended_suffix("joe", 2) == {"jo", "oe", "joe"}


def test_extended_qgrams_abcd():
    assert keys_extended_qgrams("abcd", 3, 0.8) == {"abc", "bcd", "abc_bcd"}


@pytest.mark.parametrize("kw", [
    dict(method=BuildMethod.QGRAMS, q=1),
    dict(method=BuildMethod.QGRAMS, q=7),
    dict(method=BuildMethod.EXTENDED_QGRAMS, q=3, t=1.0),
    dict(method=BuildMethod.EXTENDED_QGRAMS, q=3, t=0.7),
    dict(method=BuildMethod.SUFFIX_ARRAYS, l_min=1, b_max=10),
    dict(method=BuildMethod.SUFFIX_ARRAYS, l_min=3, b_max=101),
    dict(method=BuildMethod.EXTENDED_SUFFIX_ARRAYS, l_min=3),
])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        BlockBuildConfig(**kw)


def test_suffix_bmax_is_inclusive():
    # key "ab" is held by exactly 3 entities
    bc = build_blocks(["ab", "ab"], ["ab"], BlockBuildConfig(BuildMethod.SUFFIX_ARRAYS, l_min=2, b_max=3))
    assert [b.key for b in bc] == ["ab"]
    bc = build_blocks(["ab", "ab"], ["ab"], BlockBuildConfig(BuildMethod.SUFFIX_ARRAYS, l_min=2, b_max=2))
    assert len(bc) == 0


CONFIGS = [
    (BlockBuildConfig(), dict(method="standard")),
    (BlockBuildConfig(BuildMethod.QGRAMS, q=2), dict(method="qgrams", q=2)),
    (BlockBuildConfig(BuildMethod.QGRAMS, q=4), dict(method="qgrams", q=4)),
    (BlockBuildConfig(BuildMethod.EXTENDED_QGRAMS, q=2, t=0.8), dict(method="extended-qgrams", q=2, t=0.8)),
    (BlockBuildConfig(BuildMethod.EXTENDED_QGRAMS, q=3, t=0.95), dict(method="extended-qgrams", q=3, t=0.95)),
    (BlockBuildConfig(BuildMethod.SUFFIX_ARRAYS, l_min=2, b_max=4), dict(method="suffix-arrays", l_min=2, b_max=4)),
    (BlockBuildConfig(BuildMethod.EXTENDED_SUFFIX_ARRAYS, l_min=3, b_max=5),
     dict(method="extended-suffix-arrays", l_min=3, b_max=5)),
]

words = st.text(alphabet="abcde", min_size=1, max_size=7)
docs = st.lists(st.lists(words, max_size=4).map(" ".join), min_size=1, max_size=8)


@pytest.mark.parametrize("cfg, spec", CONFIGS, ids=[c[1]["method"] + str(i) for i, c in enumerate(CONFIGS)])
@given(left=docs, right=docs)
def test_blocks_match_key_intersection_oracle(cfg, spec, left, right):
    bc = build_blocks(left, right, cfg)
    kw = {k: v for k, v in spec.items() if k != "method"}
    assert bc.pairs() == oracle_block_pairs(left, right, spec["method"], **kw)
    for b in bc:
        assert b.left and b.right
        assert b.left == tuple(sorted(set(b.left)))
        if cfg.method.proactive:
            assert b.entities <= cfg.b_max
    for text in left[:2]:
        from erfilter.blockbuild import key_function
        assert key_function(cfg)(text) == oracle_keys(text, spec["method"], kw.get("q"), kw.get("t"), kw.get("l_min"))


def test_block_sizes():
    bc = build_blocks(["a b", "a"], ["a", "b c"], BlockBuildConfig())
    assert {b.key: (b.left, b.right) for b in bc} == {"a": ((0, 1), (0,)), "b": ((0,), (1,))}
    assert bc.total_comparisons == 3
    assert bc.total_assignments == 5
