import numpy as np
import pytest
from hypothesis import given, strategies as st

from ldavae.corpus import (Corpus, CorpusError, EmptyVocabularyError, TokenizerConfig, Vocabulary,
                           build_vocabulary, corpus_from_texts, load_csv, pad_sequence,
                           smoten_oversample, tokenize)

words = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=8)


def test_tokenize_examples():
    assert tokenize("Trump said @foo http://a.b (really)") == ["trump", "said", "really"]
    assert tokenize("") == []
    assert tokenize("the the THE", TokenizerConfig(frozenset({"the"}))) == []


def test_tokenize_drops_non_ascii_and_digits():
    assert tokenize("café naïve abc123 ok") == ["ok"]
    assert tokenize("see www.example.com now") == ["see", "now"]
    assert tokenize("well-known #tag") == ["wellknown", "tag"]


@given(st.lists(words, max_size=20))
def test_tokenize_idempotent_on_own_output(tokens):
    out = tokenize(" ".join(tokens))
    assert out == tokens
    assert tokenize(" ".join(out)) == out


def test_build_vocabulary_examples():
    v = build_vocabulary([["a", "b"], ["b", "c"]], 1)
    assert v.size == 3 and [v.id(t) for t in "abc"] == [1, 2, 3]
    v2 = build_vocabulary([["a", "b"], ["b", "c"]], 2)
    assert v2.tokens() == ["b"] and v2.id("b") == 1
    with pytest.raises(EmptyVocabularyError):
        build_vocabulary([[], []], 1)


@given(st.lists(st.lists(words, max_size=6), min_size=1, max_size=6).filter(lambda d: any(d)))
def test_vocabulary_round_trip(docs):
    v = build_vocabulary(docs)
    for i in range(1, v.size + 1):
        assert v.id(v.token(i)) == i
    with pytest.raises(IndexError):
        v.token(0)


def test_pad_sequence_examples():
    np.testing.assert_array_equal(pad_sequence([3, 7], 4), [3, 7, 0, 0])
    np.testing.assert_array_equal(pad_sequence([3, 7, 9], 3), [3, 7, 9])
    np.testing.assert_array_equal(pad_sequence([3, 7, 9, 2], 3), [3, 7, 9])


@given(st.lists(st.integers(1, 50), max_size=30), st.integers(1, 20))
def test_pad_sequence_prefix_property(seq, L):
    out = pad_sequence(seq, L)
    assert len(out) == L
    n = min(len(seq), L)
    assert list(out[:n]) == seq[:L]
    assert not out[n:].any()


def _corpus(docs, labels, V=None):
    V = V or max(max(d) for d in docs if d)
    return Corpus(docs, labels, Vocabulary.from_tokens([f"t{i}" for i in range(1, V + 1)]))


def test_smoten_tie_breaks_toward_seed():
    # two minority docs and a majority of four; k = 1 pairs the two minority docs
    c = _corpus([(1, 2, 3), (1, 2, 4), (5, 5), (5, 6), (6, 6), (6, 5)], [1, 1, 0, 0, 0, 0], V=6)
    out = smoten_oversample(c, k=1, seed=0)
    assert out.class_counts() == (4, 4)
    for new in out.docs[6:]:
        assert new in ((1, 2, 3), (1, 2, 4))  # the seed's own value wins every tie


def test_smoten_balanced_is_noop_and_preconditions():
    c = _corpus([(1,), (2,)], [0, 1])
    assert smoten_oversample(c, k=1) is c
    small = _corpus([(1,), (2,), (1, 2), (2, 2), (3,)], [1, 1, 0, 0, 0])
    with pytest.raises(CorpusError):
        smoten_oversample(small, k=3)
    with pytest.raises(CorpusError):
        smoten_oversample(_corpus([(1,), (2,)], [0, 0]), k=1)


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_smoten_balances_and_draws_from_group_values(seed, k):
    rng = np.random.default_rng(seed)
    n_min, n_maj = int(rng.integers(k + 1, 8)), int(rng.integers(9, 15))
    docs = [tuple(int(x) for x in rng.integers(1, 6, size=rng.integers(1, 6))) for _ in range(n_min + n_maj)]
    labels = [1] * n_min + [0] * n_maj
    c = _corpus(docs, labels, V=5)
    out = smoten_oversample(c, k=k, seed=seed)
    assert out.class_counts()[0] == out.class_counts()[1]
    assert out.docs[:len(docs)] == c.docs
    minority = c.padded()[:n_min]
    for new in out.docs[len(docs):]:
        row = pad_sequence(new, c.max_len)
        for j, v in enumerate(row[:len(new)]):
            assert v in minority[:, j]


def test_load_csv(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("text,label\nhello world,fake\nbye,real\n", encoding="utf-8")
    docs = load_csv(p)
    assert [d.label for d in docs] == [1, 0]
    q = tmp_path / "b.csv"
    q.write_text("text,y\nhello,1\n", encoding="utf-8")
    with pytest.raises(CorpusError, match="label"):
        load_csv(q)
    e = tmp_path / "c.csv"
    e.write_text("text,label\n", encoding="utf-8")
    assert load_csv(e) == []
    bad = tmp_path / "d.csv"
    bad.write_text("text,label\nok,1\nnope,maybe\n", encoding="utf-8")
    with pytest.raises(CorpusError, match="line 3"):
        load_csv(bad)


def test_corpus_invariants():
    c = corpus_from_texts(["a b c", "b c"], [1, 0])
    assert c.max_len == 3 and c.n_docs == 2
    assert c.padded().shape == (2, 3)
    with pytest.raises(CorpusError):
        Corpus([(1,)], [0, 1], c.vocab)
    with pytest.raises(CorpusError):
        Corpus([(9,)], [0], c.vocab)
