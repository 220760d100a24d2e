"""Small generated corpora and point clouds used by tests and experiment scripts."""
from __future__ import annotations

import csv

import numpy as np

from .corpus import Corpus, Vocabulary


def _words(prefix: str, n: int) -> list[str]:
    letters = "abcdefghijklmnopqrstuvwxyz"
    out = []
    for i in range(n):
        a, b = divmod(i, 26)
        out.append(prefix + letters[a] + letters[b])
    return out


def template_corpus(n_docs: int = 32, n_templates: int = 4, length: int = 10,
                    vocab_size: int = 40, noise: float = 0.1, seed: int = 0) -> Corpus:
    """Low-entropy corpus: each document copies one of a few fixed word templates,
    with each position replaced by a random word with probability ``noise``.

    Templates alternate between the two classes, so the template determines the label.
    """
    if n_templates < 2 or n_templates % 2:
        raise ValueError("n_templates must be even and >= 2")
    rng = np.random.default_rng(seed)
    vocab = Vocabulary.from_tokens(_words("w", vocab_size))
    templates = rng.integers(1, vocab_size + 1, size=(n_templates, length))
    which = np.arange(n_docs) % n_templates
    rng.shuffle(which)
    docs = []
    for t in which:
        doc = templates[t].copy()
        flip = rng.random(length) < noise
        doc[flip] = rng.integers(1, vocab_size + 1, size=int(flip.sum()))
        docs.append(tuple(int(i) for i in doc))
    return Corpus(docs, which % 2, vocab, length)


def xor_corpus(n_docs: int = 400, block: int = 5, words_per_topic: int = 12,
               words_per_cue: int = 3, seed: int = 0) -> tuple[Corpus, np.ndarray, np.ndarray]:
    """Label = topic indicator XOR word-order indicator.

    A document is two blocks of ``block`` words.  Block "a" starts with the
    marker ``cuea`` followed by words from its own cue set, block "b" likewise
    with ``cueb``; the rest of each block is filler from one of two disjoint
    topic word sets.  The order bit says which block comes first.  Both orders
    have the same bag-of-words distribution, so the bag of words reveals the
    topic but not the order, and neither signal alone predicts the label.
    Giving each marker its own companions keeps their distributional
    embeddings apart.  Returns ``(corpus, topic_bits, order_bits)``.
    """
    if block < 2:
        raise ValueError("block must hold a marker and at least one more word")
    rng = np.random.default_rng(seed)
    tokens = (_words("ta", words_per_topic) + _words("tb", words_per_topic)
              + ["cuea"] + _words("ca", words_per_cue) + ["cueb"] + _words("cb", words_per_cue))
    vocab = Vocabulary.from_tokens(tokens)
    cue_base = 2 * words_per_topic + 1  # id of "cuea"
    cue_ids = [cue_base, cue_base + words_per_cue + 1]
    topic = rng.integers(0, 2, size=n_docs)
    order = rng.integers(0, 2, size=n_docs)
    n_cue = (block - 1) // 2

    def make_block(which: int, t: int) -> list[int]:
        marker = cue_ids[which]
        cues = rng.integers(marker + 1, marker + 1 + words_per_cue, size=n_cue)
        base = 1 + t * words_per_topic
        filler = rng.integers(base, base + words_per_topic, size=block - 1 - n_cue)
        return [marker] + [int(x) for x in cues] + [int(x) for x in filler]

    docs = []
    for t, o in zip(topic, order):
        first, second = (0, 1) if o == 0 else (1, 0)
        docs.append(tuple(make_block(first, t) + make_block(second, t)))
    return Corpus(docs, topic ^ order, vocab, 2 * block), topic, order


def gaussian_blobs(n: int = 200, d: int = 10, separation: float = 10.0, seed: int = 0):
    """Two isotropic unit-variance blobs whose means differ by ``separation`` along axis 0."""
    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], [n // 2, n - n // 2])
    X = rng.normal(size=(n, d))
    X[:, 0] += separation * labels
    return X, labels


def write_text_csv(corpus: Corpus, path, text_column: str = "text", label_column: str = "label") -> None:
    """Write a corpus back out as the raw ``text,label`` CSV the pipeline ingests."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([text_column, label_column])
        for doc, lab in zip(corpus.docs, corpus.labels):
            w.writerow([" ".join(corpus.vocab.token(i) for i in doc), "fake" if lab == 1 else "real"])
