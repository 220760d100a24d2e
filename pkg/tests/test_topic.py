import numpy as np
import pytest
from hypothesis import given, strategies as st

from ldavae.topic import (BowDocument, LdaModel, TopicError, assignment_posterior, bow_corpus, coherence_umass,
                          document_frequencies, elbo, fit_svi, infer_document_topics, init_lda, load_lda,
                          match_topics, pick_best_k, sample_corpus, save_lda, select_num_topics, step_size,
                          topic_word_distribution, umass_score, word_topic_posterior)


@pytest.fixture(scope="module")
def planted():
    truth = sample_corpus(0.1, 0.05, K=3, V=30, n_docs=300, doc_len=50, seed=0)
    bows = bow_corpus(truth.docs)
    return truth, bows, fit_svi(bows, 3, vocab_size=30, seed=0)


def test_bow_document():
    d = BowDocument.from_ids([3, 1, 3, 0])
    assert d.as_dict() == {1: 1, 3: 2} and d.total == 3


def test_sample_corpus_examples():
    s = sample_corpus(0.5, 0.1, K=1, V=5, n_docs=4, doc_len=6, seed=0)
    np.testing.assert_allclose(s.phi, np.ones((4, 1)), atol=1e-12)
    empty = sample_corpus(0.5, 0.1, K=2, V=5, n_docs=3, doc_len=0, seed=0)
    assert all(d == () for d in empty.docs)
    flat = sample_corpus(1e6, 0.1, K=4, V=5, n_docs=10_000, doc_len=0, seed=1)
    assert np.all(np.abs(flat.phi.mean(axis=0) - 0.25) < 0.01)


def test_step_size_schedule():
    assert step_size(0, 1.0, 0.7) == 1.0
    assert step_size(3, 1.0, 0.7) == pytest.approx(4 ** -0.7)
    assert step_size(0, 0.0, 0.7) == 1.0


def test_fit_svi_single_topic_and_errors():
    bows = bow_corpus([(1, 2, 2), (3,), (1, 3, 4)])
    m = fit_svi(bows, 1, vocab_size=4, seed=0)
    np.testing.assert_allclose(m.phi(), 1.0)
    with pytest.raises(TopicError):
        fit_svi([], 2)
    with pytest.raises(TopicError):
        fit_svi(bows, 2, kappa=0.4)


def test_fit_svi_deterministic_and_improves_elbo(planted):
    truth, bows, model = planted
    again = fit_svi(bows, 3, vocab_size=30, seed=0)
    np.testing.assert_array_equal(model.lam, again.lam)
    start = init_lda(30, 3, seed=0)
    assert elbo(model, bows) > elbo(start, bows)


def test_posteriors_on_simplex(planted):
    _, bows, model = planted
    np.testing.assert_allclose(model.beta().sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(model.phi().sum(axis=1), 1.0, atol=1e-9)
    assert (model.lam > 0).all() and (model.gamma > 0).all()


def test_planted_recovery_and_dominant_topic(planted):
    truth, bows, model = planted
    pairs, sims = match_topics(model.beta(), truth.beta)
    assert sims.mean() >= 0.85
    learned_of = {true: learned for learned, true in pairs}
    # a document built only from words whose mass sits in true topic k
    for k in range(3):
        top = np.argsort(-truth.beta[k])[:5] + 1
        phi = infer_document_topics(model, BowDocument.from_ids(np.repeat(top, 3)))
        assert int(np.argmax(phi)) == learned_of[k]


def test_infer_document_topics_empty_is_prior_mean():
    m = init_lda(6, 3, alpha=[0.2, 0.3, 0.5], seed=0)
    phi = infer_document_topics(m, BowDocument.from_ids([]))
    np.testing.assert_allclose(phi, [0.2, 0.3, 0.5])


def test_topic_word_distribution():
    m = init_lda(5, 2, seed=0)
    assert topic_word_distribution(m, 1).sum() == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(IndexError):
        topic_word_distribution(m, 2)
    m.lam[0] = 7.0
    np.testing.assert_allclose(topic_word_distribution(m, 0), np.full(5, 0.2))


def test_word_topic_posterior_examples():
    m1 = init_lda(4, 1, seed=0)
    np.testing.assert_array_equal(word_topic_posterior(m1, [1, 2, 4]), np.ones((3, 1)))
    beta = np.array([[0.2, 0.8], [0.0, 1.0]])
    np.testing.assert_allclose(assignment_posterior(np.array([0.5, 0.5]), beta, [1]), [[1.0, 0.0]])
    # unknown id -> uniform
    np.testing.assert_allclose(assignment_posterior(np.array([0.5, 0.5]), beta, [9]), [[0.5, 0.5]])


def test_word_topic_posterior_rows_and_dominant_agreement(planted):
    truth, bows, model = planted
    pairs, _ = match_topics(model.beta(), truth.beta)
    learned_of = {true: learned for learned, true in pairs}
    agree = total = 0
    for doc, z, phi in zip(truth.docs[:100], truth.z[:100], truth.phi[:100]):
        post = word_topic_posterior(model, doc)
        np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-9)
        dom = int(np.argmax(phi))
        mask = z == dom
        agree += int(np.sum(np.argmax(post[mask], axis=1) == learned_of[dom]))
        total += int(mask.sum())
    assert agree / total >= 0.9


def test_umass_examples():
    # two documents both holding w1 and w2: D(w1)=2, D(w1,w2)=2
    X = document_frequencies(bow_corpus([(1, 2), (1, 2, 3)]), 3)
    assert umass_score([0, 1], X) == pytest.approx(np.log(3 / 2))
    single = document_frequencies(bow_corpus([(1, 2, 3)]), 3)
    assert umass_score([0, 1, 2], single) == pytest.approx(3 * np.log(2))


def test_umass_cooccurring_topic_beats_disjoint_topic():
    bows = bow_corpus([(1, 2), (1, 2), (3,), (4,)])
    beta = np.array([[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]])
    c = coherence_umass(beta, bows, top_n=2)
    assert c.per_topic[0] > c.per_topic[1]


def test_coherence_degenerate_topic_warns():
    bows = bow_corpus([(1, 2)])
    beta = np.array([[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]])
    with pytest.warns(RuntimeWarning):
        c = coherence_umass(beta, bows, top_n=2)
    assert c.degenerate == [1] and c.per_topic[1] == 0.0
    with pytest.raises(TopicError):
        coherence_umass(beta, [])


def test_select_num_topics_rules():
    bows = bow_corpus([(1, 2, 3), (2, 3, 4), (1, 4, 4), (3, 3, 1), (2, 2, 4)])
    assert select_num_topics(bows, candidates=[10], vocab_size=4, passes=1, restarts=1) == 10
    assert pick_best_k({16: -1.0, 8: -1.0, 32: -2.0}) == 8


@given(st.lists(st.lists(st.integers(1, 8), max_size=10), min_size=1, max_size=8), st.integers(1, 4))
def test_local_posteriors_always_simplex(docs, K):
    m = init_lda(8, K, seed=1)
    for d in docs:
        phi = infer_document_topics(m, BowDocument.from_ids(d))
        assert np.all(phi >= 0)
        assert abs(phi.sum() - 1.0) < 1e-9


def test_save_load_round_trip(tmp_path, planted):
    _, _, model = planted
    save_lda(model, tmp_path / "lda.json")
    back = load_lda(tmp_path / "lda.json")
    np.testing.assert_array_equal(back.lam, model.lam)
    np.testing.assert_array_equal(back.gamma, model.gamma)
    assert isinstance(back, LdaModel) and back.K == model.K
