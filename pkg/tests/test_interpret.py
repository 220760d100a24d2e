import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ldavae.interpret import (InterpretError, class_topic_profile, color_words, discriminative_topics,
                              explain, top_words)
from ldavae.topic import LdaModel, bow_corpus, fit_svi, match_topics, sample_corpus


def test_profile_examples():
    phi = np.array([[1, 0], [1, 0], [0, 1]], dtype=float)
    p = class_topic_profile(phi, [1, 1, 0])
    np.testing.assert_array_equal(p.fake, [1, 0])
    np.testing.assert_array_equal(p.real, [0, 1])
    single = class_topic_profile(np.array([[0.5, 0.5], [0.2, 0.8]]), [1, 0])
    np.testing.assert_array_equal(single.fake, [0.5, 0.5])
    with pytest.raises(InterpretError):
        class_topic_profile(phi, [1, 1, 1])


def test_discriminative_examples():
    p = class_topic_profile(np.array([[1.0, 0.0], [0.0, 1.0]]), [1, 0])
    assert discriminative_topics(p) == [(0, 1.0), (1, 1.0)]
    same = class_topic_profile(np.array([[0.3, 0.7], [0.3, 0.7]]), [1, 0])
    assert [s for _, s in discriminative_topics(same)] == [0.0, 0.0]
    close = class_topic_profile(np.array([[0.6, 0.4], [0.5, 0.5]]), [1, 0])
    ranked = discriminative_topics(close)
    assert [k for k, _ in ranked] == [0, 1]
    np.testing.assert_allclose([s for _, s in ranked], [0.1, 0.1], atol=1e-12)
    assert len(discriminative_topics(close, 1)) == 1


def _phi_and_labels(seed, n=30, K=4):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    labels[:2] = [0, 1]
    return rng.dirichlet(np.ones(K), size=n), labels


@given(st.integers(0, 10_000))
def test_discriminative_invariant_to_label_swap(seed):
    phi, labels = _phi_and_labels(seed)
    a = discriminative_topics(class_topic_profile(phi, labels))
    b = discriminative_topics(class_topic_profile(phi, 1 - labels))
    assert a == b
    scores = [s for _, s in a]
    assert scores == sorted(scores, reverse=True)


@given(st.integers(0, 10_000))
def test_merged_profile_is_size_weighted_combination(seed):
    phi, labels = _phi_and_labels(seed, n=40)
    a, b = slice(0, 20), slice(20, 40)
    labels[[20, 21]] = [0, 1]
    pa, pb = class_topic_profile(phi[a], labels[a]), class_topic_profile(phi[b], labels[b])
    merged = class_topic_profile(phi, labels)
    for cls, n in (("fake", "n_fake"), ("real", "n_real")):
        wa, wb = getattr(pa, n), getattr(pb, n)
        expect = (wa * getattr(pa, cls) + wb * getattr(pb, cls)) / (wa + wb)
        np.testing.assert_allclose(getattr(merged, cls), expect, atol=1e-12)
        assert abs(getattr(merged, cls).sum() - 1.0) < 1e-9


def test_top_words_examples():
    vocab = ["w0", "w1", "w2"]
    out = top_words([0.5, 0.3, 0.2], vocab, n=2)
    assert [t for t, _ in out] == ["w0", "w1"]
    np.testing.assert_allclose([f for _, f in out], [0.625, 0.375])
    full = top_words([0.5, 0.3, 0.2], vocab, n=10)
    np.testing.assert_allclose([f for _, f in full], [0.5, 0.3, 0.2])
    flat = top_words([0.25] * 4, vocab + ["w3"], n=3)
    assert [t for t, _ in flat] == ["w0", "w1", "w2"]
    np.testing.assert_allclose([f for _, f in flat], [1 / 3] * 3)
    with pytest.raises(InterpretError):
        top_words([1.0], ["a"], n=0)


@given(st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=30), st.integers(1, 40))
def test_top_words_normalized_and_non_increasing(weights, n):
    beta = np.array(weights) / np.sum(weights)
    out = top_words(beta, [f"t{i}" for i in range(len(beta))], n)
    freqs = [f for _, f in out]
    assert len(out) == min(n, len(beta))
    assert abs(sum(freqs) - 1.0) < 1e-9
    assert all(x >= y for x, y in zip(freqs, freqs[1:]))


def test_color_words_degenerate_and_forced():
    single = LdaModel(1, np.array([0.5]), 0.01, np.ones((1, 4)))
    assert {c.topic for c in color_words(single, [1, 2, 3, 4])} == {0}
    lam = np.ones((3, 4))
    lam[:2, 2] = 1e-300  # word 3 carries mass only in topic 2
    m = LdaModel(3, np.full(3, 1 / 3), 0.01, lam)
    colors = color_words(m, [3, 1, 3], vocab=["a", "b", "c", "d"])
    assert colors[0].topic == 2 and colors[2].topic == 2 and colors[0].token == "c"


@pytest.fixture(scope="module")
def planted_model():
    truth = sample_corpus(0.1, 0.05, K=3, V=30, n_docs=300, doc_len=50, seed=0)
    return truth, fit_svi(bow_corpus(truth.docs), 3, vocab_size=30, seed=0)


def test_color_words_planted_dominant_topic(planted_model):
    truth, model = planted_model
    pairs, _ = match_topics(model.beta(), truth.beta)
    learned_of = {t: l for l, t in pairs}
    hit = total = 0
    for doc, z, phi in zip(truth.docs, truth.z, truth.phi):
        dom = int(np.argmax(phi))
        colors = color_words(model, doc)
        for c, zz in zip(colors, z):
            if zz == dom:
                hit += c.topic == learned_of[dom]
                total += 1
    assert hit / total >= 0.9


def test_explain_deterministic_and_schema(planted_model):
    truth, model = planted_model
    labels = (np.argmax(truth.phi, axis=1) == 0).astype(int)
    vocab = [f"v{i}" for i in range(30)]
    args = (model, truth.phi, labels, vocab)
    a = explain(*args, top_m=2, n_words=5, documents=truth.docs[:2])
    b = explain(*args, top_m=2, n_words=5, documents=truth.docs[:2])
    assert a.to_json() == b.to_json()
    blob = json.loads(a.to_json())
    assert set(blob) >= {"profiles", "topics", "documents"}
    assert set(blob["profiles"]) == {"real", "fake"}
    assert len(blob["topics"]) == 2
    for t in blob["topics"]:
        assert set(t) == {"id", "score", "top_words"}
        assert abs(sum(w["freq"] for w in t["top_words"]) - 1.0) < 1e-9
    assert blob["topics"][0]["score"] >= blob["topics"][1]["score"]
    assert len(blob["documents"][0]["tokens"]) == len(truth.docs[0])
    assert set(blob["documents"][0]["tokens"][0]) == {"token", "topic"}
