"""Topic-level explanations: class profiles, discriminative topics, top words, word coloring."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Vocabulary
from .topic import LdaModel, word_topic_posterior


class InterpretError(ValueError):
    pass


@dataclass
class ClassTopicProfile:
    real: np.ndarray
    fake: np.ndarray
    n_real: int
    n_fake: int

    @property
    def K(self) -> int:
        return len(self.real)


@dataclass
class RankedTopic:
    id: int
    score: float
    top_words: list = field(default_factory=list)  # [(token, freq)]


@dataclass
class WordColor:
    token: str
    topic: int
    posterior: np.ndarray


@dataclass
class ExplanationReport:
    profile: ClassTopicProfile
    topics: list  # RankedTopic, scores descending
    documents: list = field(default_factory=list)  # list of list[WordColor]

    def as_dict(self) -> dict:
        return {
            "profiles": {"real": self.profile.real.tolist(), "fake": self.profile.fake.tolist()},
            "class_sizes": {"real": self.profile.n_real, "fake": self.profile.n_fake},
            "topics": [{"id": t.id, "score": t.score,
                        "top_words": [{"token": w, "freq": f} for w, f in t.top_words]} for t in self.topics],
            "documents": [{"tokens": [{"token": c.token, "topic": c.topic} for c in doc]}
                          for doc in self.documents],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=1, sort_keys=True)


def class_topic_profile(phi, labels) -> ClassTopicProfile:
    """Per-class mean of the document-topic rows (label 1 = fake)."""
    phi = np.asarray(phi, dtype=np.float64)
    labels = np.asarray(labels).reshape(-1)
    if phi.ndim != 2 or len(phi) != len(labels):
        raise InterpretError(f"phi {phi.shape} does not align with {len(labels)} labels")
    fake, real = labels == 1, labels == 0
    if not fake.any() or not real.any():
        raise InterpretError("both classes must be present to build a topic profile")
    return ClassTopicProfile(phi[real].mean(axis=0), phi[fake].mean(axis=0), int(real.sum()), int(fake.sum()))


def discriminative_topics(profile: ClassTopicProfile, top_m: int | None = None) -> list[tuple[int, float]]:
    """Topics ranked by |fake mean - real mean|, ties toward the smaller index."""
    K = profile.K
    top_m = K if top_m is None else top_m
    if not 0 <= top_m <= K:
        raise InterpretError(f"top_m={top_m} outside 0..{K}")
    scores = np.abs(profile.fake - profile.real)
    order = np.argsort(-scores, kind="stable")[:top_m]
    return [(int(k), float(scores[k])) for k in order]


def _token_list(vocab) -> list[str]:
    return vocab.tokens() if isinstance(vocab, Vocabulary) else list(vocab)


def top_words(beta_k, vocab, n: int = 20) -> list[tuple[str, float]]:
    """The ``n`` most probable words of a topic with frequencies renormalized over them."""
    if n < 1:
        raise InterpretError("n must be >= 1")
    beta_k = np.asarray(beta_k, dtype=np.float64)
    tokens = _token_list(vocab)
    if len(tokens) != len(beta_k):
        raise InterpretError(f"{len(beta_k)} topic weights for a vocabulary of {len(tokens)}")
    order = np.argsort(-beta_k, kind="stable")[:n]
    mass = beta_k[order]
    freqs = mass / mass.sum()
    return [(tokens[j], float(f)) for j, f in zip(order, freqs)]


def color_words(model: LdaModel, doc: Sequence[int], vocab=None) -> list[WordColor]:
    """Most probable topic for every token of ``doc`` (a sequence of vocabulary ids)."""
    ids = np.asarray(doc, dtype=np.int64)
    post = word_topic_posterior(model, ids)
    topics = np.argmax(post, axis=1)  # first maximum = smaller index on ties
    tokens = _token_list(vocab) if vocab is not None else None

    def name(i):
        if tokens is not None and 1 <= i <= len(tokens):
            return tokens[i - 1]
        return str(int(i))

    return [WordColor(name(i), int(k), p) for i, k, p in zip(ids, topics, post)]


def explain(model: LdaModel, phi, labels, vocab, top_m: int = 5, n_words: int = 20,
            documents: Sequence[Sequence[int]] = ()) -> ExplanationReport:
    profile = class_topic_profile(phi, labels)
    beta = model.beta()
    ranked = [RankedTopic(k, s, top_words(beta[k], vocab, n_words))
              for k, s in discriminative_topics(profile, min(top_m, model.K))]
    colored = [color_words(model, d, vocab) for d in documents]
    return ExplanationReport(profile, ranked, colored)
