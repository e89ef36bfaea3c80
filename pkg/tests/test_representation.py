import pytest
from hypothesis import given
from hypothesis import strategies as st

from erfilter.core import ConfigError
from erfilter.representation import (
    ALL_MODELS,
    Measure,
    ReprModel,
    char_ngrams,
    cosine,
    dice,
    jaccard,
    similarity_from_overlap,
    strip_counters,
    tokenize,
)


def test_multiset_counters():
    assert tokenize("a a b", ReprModel.parse("T1GM")).tokens == {"a#1", "a#2", "b#1"}


def test_word_tokens():
    assert tokenize("Joe Biden", ReprModel.parse("T1G")).tokens == {"Joe", "Biden"}


def test_char_grams():
    assert char_ngrams("abcd", 3) == ["abc", "bcd"]
    assert char_ngrams("ab", 3) == ["ab"]
    assert char_ngrams("", 3) == []
    assert tokenize("ab ab", ReprModel.parse("C2G")).tokens == {"ab", "b ", " a"}


def test_model_codes():
    assert [m.code for m in ALL_MODELS] == ["T1G", "T1GM", "C2G", "C2GM", "C3G", "C3GM", "C4G", "C4GM", "C5G", "C5GM"]
    with pytest.raises(ConfigError):
        ReprModel.parse("C7G")
    with pytest.raises(ConfigError):
        ReprModel.parse("X1G")


def test_measure_values():
    a, b = {"x", "y", "z"}, {"y", "z", "w", "v"}
    assert cosine(a, b) == pytest.approx(2 / 12 ** 0.5)
    assert dice(a, b) == pytest.approx(4 / 7)
    assert jaccard(a, b) == pytest.approx(2 / 5)
    assert jaccard(set(), b) == 0.0
    assert Measure.parse("Jaccard") is Measure.JACCARD


sets = st.frozensets(st.sampled_from("abcdefgh"), max_size=8)


@given(sets, sets)
def test_measures_bounded_symmetric_and_ordered(a, b):
    for f in (cosine, dice, jaccard):
        s = f(a, b)
        assert 0.0 <= s <= 1.0 + 1e-12
        assert s == pytest.approx(f(b, a))
    # Jaccard <= Dice <= Cosine for every pair of sets
    assert jaccard(a, b) <= dice(a, b) + 1e-12 <= cosine(a, b) + 2e-12
    if a:
        assert cosine(a, a) == pytest.approx(1.0)
    for m, f in ((Measure.COSINE, cosine), (Measure.DICE, dice), (Measure.JACCARD, jaccard)):
        if a and b:
            assert similarity_from_overlap(m, len(a & b), len(a), len(b)) == pytest.approx(f(a, b))


@given(st.text(alphabet="ab c", max_size=20), st.sampled_from(ALL_MODELS))
def test_multiset_strip_recovers_set_model(text, model):
    if not model.multiset:
        return
    plain = ReprModel(model.kind, model.n, False)
    assert strip_counters(tokenize(text, model).tokens) == tokenize(text, plain).tokens
