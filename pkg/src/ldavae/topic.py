"""LDA topic model fitted by stochastic variational inference.

Variational family: q(beta_k) = Dirichlet(lambda_k), q(phi_i) = Dirichlet(gamma_i),
q(z_ij) = Multinomial.  The global update follows the noisy natural gradient
lambda <- (1 - rho) lambda + rho (eta + N/|B| * sufficient stats), with
rho_t = (tau0 + t)^-kappa.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import digamma, gammaln, logsumexp

from .corpus import Corpus

log = logging.getLogger(__name__)

LOCAL_TOL = 1e-3
LOCAL_MAX_ITER = 100
DEFAULT_CANDIDATES = (8, 10, 16, 32, 64)
SEED_WEIGHT = 10.0


class TopicError(ValueError):
    pass


@dataclass(frozen=True)
class BowDocument:
    """Distinct vocabulary ids (1-based, ascending) with their counts."""

    ids: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_ids(cls, seq: Sequence[int]) -> "BowDocument":
        ids, counts = np.unique(np.asarray(seq, dtype=np.int64), return_counts=True)
        keep = ids > 0
        return cls(ids[keep], counts[keep].astype(np.float64))

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def as_dict(self) -> dict:
        return {int(i): int(c) for i, c in zip(self.ids, self.counts)}


def bow_corpus(docs) -> list[BowDocument]:
    if isinstance(docs, Corpus):
        docs = docs.docs
    return [BowDocument.from_ids(d) for d in docs]


def dirichlet_expectation(alpha: np.ndarray) -> np.ndarray:
    """E[log theta] for theta ~ Dir(alpha), row-wise for matrices."""
    if alpha.ndim == 1:
        return digamma(alpha) - digamma(alpha.sum())
    return digamma(alpha) - digamma(alpha.sum(axis=1))[:, None]


@dataclass
class LdaModel:
    K: int
    alpha: np.ndarray
    eta: float
    lam: np.ndarray  # K x |V|
    gamma: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))  # N x K, training docs
    vocab_digest: str = ""
    updates: int = 0

    @property
    def vocab_size(self) -> int:
        return self.lam.shape[1]

    def beta(self) -> np.ndarray:
        """Posterior mean topic-word matrix, rows on the simplex."""
        return self.lam / self.lam.sum(axis=1, keepdims=True)

    def phi(self) -> np.ndarray:
        """Posterior mean document-topic matrix for the training documents."""
        return self.gamma / self.gamma.sum(axis=1, keepdims=True)


def _alpha_vector(alpha, K: int) -> np.ndarray:
    a = np.full(K, 1.0 / K) if alpha is None else np.broadcast_to(np.asarray(alpha, dtype=np.float64), (K,)).copy()
    if not (a > 0).all():
        raise TopicError("alpha must be positive")
    return a


def init_lda(vocab_size: int, K: int, alpha=None, eta: float = 0.01, seed: int = 0,
             counts: np.ndarray | None = None) -> LdaModel:
    """Initial lambda: Gamma(100, 1/100) noise, optionally plus seeding documents.

    With a dense count matrix, K documents are picked k-means++ style on their
    normalised word frequencies and their counts (scaled by ``SEED_WEIGHT``)
    added to the rows of lambda, which breaks topic symmetry from the start.
    """
    if K < 1 or vocab_size < 1:
        raise TopicError("K and vocabulary size must be >= 1")
    if not eta > 0:
        raise TopicError("eta must be positive")
    rng = np.random.default_rng(seed)
    lam = rng.gamma(100.0, 1.0 / 100.0, size=(K, vocab_size))
    if counts is not None and counts.shape[0] > 0:
        lam += SEED_WEIGHT * counts[_kmeanspp(counts, K, rng)]
    return LdaModel(K, _alpha_vector(alpha, K), float(eta), lam)


def _kmeanspp(counts: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    tot = counts.sum(axis=1, keepdims=True)
    X = np.divide(counts, tot, out=np.zeros_like(counts), where=tot > 0)
    chosen = [int(rng.integers(len(X)))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, K):
        if d2.sum() <= 0:
            chosen.append(int(rng.integers(len(X))))
        else:
            chosen.append(int(rng.choice(len(X), p=d2 / d2.sum())))
        d2 = np.minimum(d2, ((X - X[chosen[-1]]) ** 2).sum(axis=1))
    return np.array(chosen)


def _dense_counts(bows: Sequence[BowDocument], V: int) -> np.ndarray:
    C = np.zeros((len(bows), V))
    for r, doc in enumerate(bows):
        known = doc.ids <= V
        C[r, doc.ids[known] - 1] = doc.counts[known]
    return C


def _e_step(C: np.ndarray, alpha: np.ndarray, exp_elog_beta: np.ndarray):
    """Coordinate ascent on the local parameters of every row of ``C``.

    Each document stops once its mean absolute gamma change drops below
    ``LOCAL_TOL`` (or after ``LOCAL_MAX_ITER`` sweeps).  Returns gamma and the
    sufficient statistics still to be multiplied by exp(E[log beta]).
    """
    n, K = C.shape[0], len(alpha)
    gamma = alpha + C.sum(axis=1, keepdims=True) / K
    exp_elog_theta = np.exp(dirichlet_expectation(gamma))
    active = np.arange(n)
    for _ in range(LOCAL_MAX_ITER):
        if len(active) == 0:
            break
        Ca = C[active]
        et = exp_elog_theta[active]
        norm = et @ exp_elog_beta + 1e-100
        new = alpha + et * ((Ca / norm) @ exp_elog_beta.T)
        change = np.abs(new - gamma[active]).mean(axis=1)
        gamma[active] = new
        exp_elog_theta[active] = np.exp(dirichlet_expectation(new))
        active = active[change >= LOCAL_TOL]
    norm = exp_elog_theta @ exp_elog_beta + 1e-100
    sstats = exp_elog_theta.T @ (C / norm)
    return gamma, sstats


def local_step(model: LdaModel, bows: Sequence[BowDocument]) -> np.ndarray:
    """Fitted gamma for each document with lambda held fixed."""
    if not bows:
        return np.zeros((0, model.K))
    C = _dense_counts(bows, model.vocab_size)
    gamma, _ = _e_step(C, model.alpha, np.exp(dirichlet_expectation(model.lam)))
    return gamma


def step_size(t: int, tau0: float, kappa: float) -> float:
    base = tau0 + t
    return 1.0 if base <= 1.0 else base ** -kappa


def fit_svi(bows: Sequence[BowDocument], K: int, vocab_size: int | None = None, alpha=None,
            eta: float = 0.01, batch_size: int = 64, tau0: float = 1.0, kappa: float = 0.7,
            passes: int = 5, seed: int = 0, restarts: int = 3, vocab_digest: str = "") -> LdaModel:
    """Fit LDA by stochastic variational inference over shuffled mini-batches.

    ``restarts`` independent initialisations are run and the one with the
    highest training ELBO is kept.
    """
    if not bows:
        raise TopicError("cannot fit a topic model on an empty corpus")
    if not 0.5 < kappa <= 1.0:
        raise TopicError("kappa must lie in (0.5, 1]")
    if tau0 < 0 or batch_size < 1 or passes < 1 or restarts < 1:
        raise TopicError("tau0 must be >= 0; batch_size, passes and restarts >= 1")
    V = vocab_size or max((int(d.ids.max()) for d in bows if len(d)), default=1)
    C_all = _dense_counts(bows, V)
    best, best_score = None, -np.inf
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        model = _fit_once(C_all, K, V, alpha, eta, batch_size, tau0, kappa, passes,
                          np.random.default_rng(child))
        score = elbo(model, bows, model.gamma)
        log.debug("restart %d: ELBO %.3f", r, score)
        if score > best_score:
            best, best_score = model, score
    best.vocab_digest = vocab_digest
    return best


def _fit_once(C_all, K, V, alpha, eta, batch_size, tau0, kappa, passes, rng) -> LdaModel:
    D = C_all.shape[0]
    model = init_lda(V, K, alpha, eta, int(rng.integers(2**63)), counts=C_all)
    t = 0
    for _ in range(passes):
        order = rng.permutation(D)
        for start in range(0, D, batch_size):
            batch = order[start:start + batch_size]
            exp_elog_beta = np.exp(dirichlet_expectation(model.lam))
            _, sstats = _e_step(C_all[batch], model.alpha, exp_elog_beta)
            sstats *= exp_elog_beta
            rho = step_size(t, tau0, kappa)
            model.lam = (1.0 - rho) * model.lam + rho * (eta + (D / len(batch)) * sstats)
            t += 1
    model.updates = t
    model.gamma, _ = _e_step(C_all, model.alpha, np.exp(dirichlet_expectation(model.lam)))
    return model


def elbo(model: LdaModel, bows: Sequence[BowDocument], gamma: np.ndarray | None = None) -> float:
    """Evidence lower bound on the corpus with the optimal q(z) plugged in."""
    C = _dense_counts(bows, model.vocab_size)
    if gamma is None:
        gamma = local_step(model, bows)
    alpha, eta, lam = model.alpha, model.eta, model.lam
    elog_theta = dirichlet_expectation(gamma)
    elog_beta = dirichlet_expectation(lam)
    score = 0.0
    for r in range(C.shape[0]):
        cols = np.flatnonzero(C[r])
        if len(cols):
            mix = logsumexp(elog_theta[r][:, None] + elog_beta[:, cols], axis=0)
            score += float(C[r, cols] @ mix)
    score += float(np.sum((alpha - gamma) * elog_theta))
    score += float(np.sum(gammaln(gamma) - gammaln(alpha)))
    score += float(np.sum(gammaln(alpha.sum()) - gammaln(gamma.sum(axis=1))))
    V = model.vocab_size
    score += float(np.sum((eta - lam) * elog_beta))
    score += float(np.sum(gammaln(lam) - gammaln(eta)))
    score += float(np.sum(gammaln(eta * V) - gammaln(lam.sum(axis=1))))
    return score


def infer_document_topics(model: LdaModel, bow: BowDocument) -> np.ndarray:
    """Posterior mean of phi for one document (words outside the vocabulary are ignored)."""
    gamma = local_step(model, [bow])[0]
    return gamma / gamma.sum()


def topic_word_distribution(model: LdaModel, k: int) -> np.ndarray:
    if not 0 <= k < model.K:
        raise IndexError(f"topic {k} outside 0..{model.K - 1}")
    row = model.lam[k]
    return row / row.sum()


def assignment_posterior(phi: np.ndarray, beta: np.ndarray, ids: Sequence[int]) -> np.ndarray:
    """p(z = k | w) proportional to phi_k * beta_k[w], one row per id.

    Ids outside ``1..|V|`` and words with zero likelihood under every topic get
    the uniform distribution.
    """
    ids = np.asarray(ids, dtype=np.int64)
    K, V = beta.shape
    out = np.full((len(ids), K), 1.0 / K)
    ok = (ids >= 1) & (ids <= V)
    if ok.any():
        w = phi[None, :] * beta[:, ids[ok] - 1].T
        tot = w.sum(axis=1, keepdims=True)
        good = tot[:, 0] > 0
        rows = np.flatnonzero(ok)
        out[rows[good]] = w[good] / tot[good]
    return out


def word_topic_posterior(model: LdaModel, doc) -> np.ndarray:
    """Topic posterior for each word of a document.

    ``doc`` is a sequence of vocabulary ids (one row per token, in order) or a
    :class:`BowDocument` (one row per distinct id).
    """
    if isinstance(doc, BowDocument):
        bow, ids = doc, doc.ids
    else:
        ids = np.asarray(doc, dtype=np.int64)
        bow = BowDocument.from_ids(ids)
    phi = infer_document_topics(model, bow)
    return assignment_posterior(phi, model.beta(), ids)


@dataclass
class Coherence:
    per_topic: np.ndarray
    mean: float
    degenerate: list[int]  # topics with fewer than two in-corpus top words


def document_frequencies(bows: Sequence[BowDocument], V: int) -> np.ndarray:
    """Binary N x V incidence matrix."""
    X = np.zeros((len(bows), V), dtype=np.float64)
    for r, doc in enumerate(bows):
        known = doc.ids <= V
        X[r, doc.ids[known] - 1] = 1.0
    return X


def umass_score(ranked_cols: Sequence[int], incidence: np.ndarray) -> float:
    """Sum over rank pairs (l before m) of log((D(w_m, w_l) + 1) / D(w_l))."""
    cols = np.asarray(ranked_cols, dtype=np.int64)
    sub = incidence[:, cols]
    co = sub.T @ sub
    df = np.diag(co)
    score = 0.0
    for m in range(1, len(cols)):
        for l in range(m):
            score += np.log((co[m, l] + 1.0) / df[l])
    return float(score)


def coherence_umass(model, bows: Sequence[BowDocument], top_n: int = 20) -> Coherence:
    """UMass coherence of each topic's ``top_n`` words over ``bows``.

    ``model`` may be an :class:`LdaModel` or a K x |V| topic-word matrix.  Top
    words absent from ``bows`` are dropped before scoring.
    """
    if not bows:
        raise TopicError("coherence needs a non-empty reference corpus")
    beta = model.beta() if isinstance(model, LdaModel) else np.asarray(model, dtype=np.float64)
    K, V = beta.shape
    X = document_frequencies(bows, V)
    present = X.sum(axis=0) > 0
    scores = np.zeros(K)
    degenerate = []
    for k in range(K):
        ranked = np.argsort(-beta[k], kind="stable")[:top_n]
        ranked = ranked[present[ranked]]
        if len(ranked) < 2:
            degenerate.append(k)
            continue
        scores[k] = umass_score(ranked, X)
    if degenerate:
        warnings.warn(f"topics {degenerate} have fewer than two top words in the corpus; scored 0",
                      RuntimeWarning, stacklevel=2)
    return Coherence(scores, float(scores.mean()), degenerate)


def score_num_topics(bows: Sequence[BowDocument], candidates=DEFAULT_CANDIDATES,
                     validation_fraction: float = 0.2, seed: int = 0, vocab_size: int | None = None,
                     top_n: int = 20, **fit_kwargs) -> dict[int, float]:
    """Validation coherence of a model fitted on the remaining documents, per candidate K."""
    candidates = sorted(set(int(k) for k in candidates))
    if not candidates:
        raise TopicError("no candidate topic counts given")
    if len(bows) < 2:
        raise TopicError("need at least two documents to hold out a validation set")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(bows))
    n_val = min(len(bows) - 1, max(1, int(round(validation_fraction * len(bows)))))
    val = [bows[i] for i in order[:n_val]]
    train = [bows[i] for i in order[n_val:]]
    V = vocab_size or max((int(d.ids.max()) for d in bows if len(d)), default=1)
    out = {}
    for K in candidates:
        model = fit_svi(train, K, vocab_size=V, seed=seed, **fit_kwargs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            out[K] = coherence_umass(model, val, top_n).mean
        log.info("K=%d validation coherence %.4f", K, out[K])
    return out


def select_num_topics(bows: Sequence[BowDocument], candidates=DEFAULT_CANDIDATES,
                      validation_fraction: float = 0.2, seed: int = 0, **kwargs) -> int:
    """Coherence-maximising K; ties go to the smaller K."""
    scores = score_num_topics(bows, candidates, validation_fraction, seed, **kwargs)
    return pick_best_k(scores)


def pick_best_k(scores: dict) -> int:
    best = max(scores.values())
    return min(k for k, v in scores.items() if v == best)


@dataclass
class SyntheticLda:
    docs: list[tuple[int, ...]]
    beta: np.ndarray
    phi: np.ndarray
    z: list[np.ndarray]


def sample_corpus(alpha, eta: float, K: int, V: int, n_docs: int, doc_len: int,
                  seed: int = 0) -> SyntheticLda:
    """Ancestral sampling from the LDA generative process.

    Word ids in the returned documents are 1-based; topic assignments are
    0-based.
    """
    if min(K, V, n_docs) < 1 or doc_len < 0:
        raise TopicError("K, V, n_docs must be >= 1 and doc_len >= 0")
    rng = np.random.default_rng(seed)
    a = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (K,))
    beta = rng.dirichlet(np.full(V, float(eta)), size=K)
    phi = rng.dirichlet(a, size=n_docs)
    docs, zs = [], []
    for i in range(n_docs):
        z = rng.choice(K, size=doc_len, p=phi[i])
        words = np.array([rng.choice(V, p=beta[k]) for k in z], dtype=np.int64)
        docs.append(tuple(int(w) + 1 for w in words))
        zs.append(z)
    return SyntheticLda(docs, beta, phi, zs)


def match_topics(learned: np.ndarray, truth: np.ndarray) -> tuple[list[tuple[int, int]], np.ndarray]:
    """Greedy one-to-one matching on cosine similarity; returns pairs (learned, true)."""
    a = learned / np.linalg.norm(learned, axis=1, keepdims=True)
    b = truth / np.linalg.norm(truth, axis=1, keepdims=True)
    sim = a @ b.T
    pairs, sims = [], []
    work = sim.copy()
    for _ in range(min(work.shape)):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        pairs.append((int(i), int(j)))
        sims.append(sim[i, j])
        work[i, :] = -np.inf
        work[:, j] = -np.inf
    return pairs, np.array(sims)


# ---------------------------------------------------------------------------
# persistence

def save_lda(model: LdaModel, path) -> None:
    blob = {"format": "ldavae-lda", "version": 1, "K": model.K,
            "alpha": model.alpha.tolist(), "eta": model.eta, "updates": model.updates,
            "lambda": model.lam.tolist(), "gamma": model.gamma.tolist(),
            "vocab_digest": model.vocab_digest}
    Path(path).write_text(json.dumps(blob, sort_keys=True), encoding="utf-8")


def load_lda(path) -> LdaModel:
    blob = json.loads(Path(path).read_text(encoding="utf-8"))
    if blob.get("format") != "ldavae-lda":
        raise TopicError(f"{path}: not an LDA model file")
    gamma = np.array(blob["gamma"], dtype=np.float64).reshape(-1, blob["K"])
    return LdaModel(blob["K"], np.array(blob["alpha"]), blob["eta"], np.array(blob["lambda"]),
                    gamma, blob["vocab_digest"], blob["updates"])
