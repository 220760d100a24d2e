"""Word vectors: skip-gram with negative sampling, word2vec text I/O, lookup."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .corpus import PAD_ID, Corpus, Vocabulary

NOISE_POWER = 0.75


class EmbeddingError(ValueError):
    pass


class Word2VecFormatError(EmbeddingError):
    pass


class DimensionMismatchError(Word2VecFormatError):
    pass


@dataclass
class EmbeddingMatrix:
    """Row ``i`` holds the vector of vocabulary id ``i + 1``."""

    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 1:
            raise EmbeddingError(f"embedding table must be |V| x w, got {self.vectors.shape}")
        if not np.isfinite(self.vectors).all():
            raise EmbeddingError("embedding table has non-finite entries")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    def table(self) -> np.ndarray:
        """Lookup table indexed directly by token id, row 0 is the zero pad row."""
        return np.vstack([np.zeros((1, self.dim)), self.vectors])

    def vector(self, vocab: Vocabulary, token: str) -> np.ndarray:
        return self.vectors[vocab.id(token) - 1]


def _uniform_init(rng: np.random.Generator, n: int, w: int) -> np.ndarray:
    return rng.uniform(-0.5 / w, 0.5 / w, size=(n, w))


def _skipgram_pairs(corpus: Corpus, window: int) -> np.ndarray:
    pairs = []
    for doc in corpus.docs:
        n = len(doc)
        for i, centre in enumerate(doc):
            for j in range(max(0, i - window), min(n, i + window + 1)):
                if j != i:
                    pairs.append((centre, doc[j]))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def noise_distribution(corpus: Corpus) -> np.ndarray:
    counts = np.bincount(np.concatenate([np.asarray(d, dtype=np.int64) for d in corpus.docs] or [np.zeros(0, np.int64)]),
                         minlength=corpus.vocab.size + 1).astype(np.float64)
    counts[PAD_ID] = 0.0
    weights = counts ** NOISE_POWER
    return weights / weights.sum()


def negative_sampling_loss(w_in: np.ndarray, w_out: np.ndarray, centres, contexts, noise) -> float:
    """Mean over pairs of -log s(u.v) - sum_n log s(-u.v_n)."""
    u = w_in[centres]
    pos = np.einsum("bw,bw->b", u, w_out[contexts])
    neg = np.einsum("bw,bnw->bn", u, w_out[noise])
    return float(np.mean(np.logaddexp(0.0, -pos) + np.logaddexp(0.0, neg).sum(axis=1)))


def negative_sampling_grads(w_in, w_out, centres, contexts, noise):
    """Gradients of the summed batch loss w.r.t. the in and out tables."""
    u = w_in[centres]
    v_pos = w_out[contexts]
    v_neg = w_out[noise]
    g_pos = expit(np.einsum("bw,bw->b", u, v_pos)) - 1.0
    g_neg = expit(np.einsum("bw,bnw->bn", u, v_neg))
    d_u = g_pos[:, None] * v_pos + np.einsum("bn,bnw->bw", g_neg, v_neg)
    d_in = np.zeros_like(w_in)
    d_out = np.zeros_like(w_out)
    np.add.at(d_in, centres, d_u)
    np.add.at(d_out, contexts, g_pos[:, None] * u)
    np.add.at(d_out, noise, g_neg[:, :, None] * u[:, None, :])
    return d_in, d_out


def train_skipgram(corpus: Corpus, w: int = 32, window: int = 5, negatives: int = 5,
                   epochs: int = 5, lr: float = 0.025, seed: int = 0,
                   batch_size: int = 128) -> EmbeddingMatrix:
    """Skip-gram word vectors trained by mini-batch SGD on the negative-sampling loss.

    The learning rate decays linearly to ``1e-4 * lr`` over training.  The
    returned vector for each word is the sum of its input and output
    vectors, which places words that predict each other close together.
    """
    V = corpus.vocab.size
    if window < 1 or negatives < 1 or epochs < 1 or w < 1:
        raise EmbeddingError("window, negatives, epochs and w must all be >= 1")
    if V < negatives + 1:
        raise EmbeddingError(f"vocabulary of {V} is smaller than negatives + 1 = {negatives + 1}")
    pairs = _skipgram_pairs(corpus, window)
    if len(pairs) == 0:
        raise EmbeddingError("corpus yields no (centre, context) pairs")

    rng = np.random.default_rng(seed)
    w_in = np.vstack([np.zeros((1, w)), _uniform_init(rng, V, w)])
    w_out = np.zeros((V + 1, w))
    noise_p = noise_distribution(corpus)

    n_batches = -(-len(pairs) // batch_size)
    total, step = epochs * n_batches, 0
    for _ in range(epochs):
        order = rng.permutation(len(pairs))
        for start in range(0, len(pairs), batch_size):
            batch = pairs[order[start:start + batch_size]]
            noise = rng.choice(V + 1, size=(len(batch), negatives), p=noise_p)
            rate = lr * max(1e-4, 1.0 - step / total)
            d_in, d_out = negative_sampling_grads(w_in, w_out, batch[:, 0], batch[:, 1], noise)
            w_in -= rate * d_in
            w_out -= rate * d_out
            w_in[PAD_ID] = 0.0
            w_out[PAD_ID] = 0.0
            step += 1
    return EmbeddingMatrix(w_in[1:] + w_out[1:])


def load_word2vec_text(path, vocab: Vocabulary, seed: int = 0) -> EmbeddingMatrix:
    """Read the word2vec text format; vocabulary tokens absent from the file get
    uniform random rows in ``[-0.5/w, 0.5/w]``."""
    found: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or not all(h.isdigit() for h in header):
            raise Word2VecFormatError(f"{path}:1: expected header '<count> <dim>'")
        count, dim = int(header[0]), int(header[1])
        if dim < 1:
            raise Word2VecFormatError(f"{path}:1: dimension must be >= 1")
        n_rows = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if len(parts) - 1 != dim:
                raise DimensionMismatchError(
                    f"{path}:{lineno}: {len(parts) - 1} values, header says {dim}")
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise Word2VecFormatError(f"{path}:{lineno}: non-numeric value") from None
            n_rows += 1
            if parts[0] in vocab and parts[0] not in found:
                found[parts[0]] = vec
        if n_rows != count:
            raise Word2VecFormatError(f"{path}: header promises {count} rows, found {n_rows}")

    rng = np.random.default_rng(seed)
    table = _uniform_init(rng, vocab.size, dim)
    for tok, vec in found.items():
        table[vocab.id(tok) - 1] = vec
    return EmbeddingMatrix(table)


def save_word2vec_text(path, E: EmbeddingMatrix, vocab: Vocabulary) -> None:
    if E.size != vocab.size:
        raise EmbeddingError(f"{E.size} rows for a vocabulary of {vocab.size}")
    lines = [f"{E.size} {E.dim}"]
    for tok, row in zip(vocab.tokens(), E.vectors):
        lines.append(tok + " " + " ".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def embed_document(padded_ids, E: EmbeddingMatrix) -> np.ndarray:
    """L x w matrix: row j is the vector of id j, zeros for padding."""
    ids = np.asarray(padded_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() > E.size):
        raise EmbeddingError(f"token id outside 0..{E.size}")
    out = np.zeros(ids.shape + (E.dim,))
    mask = ids != PAD_ID
    out[mask] = E.vectors[ids[mask] - 1]
    return out
