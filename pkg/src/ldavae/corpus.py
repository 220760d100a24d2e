"""Text ingestion: tokenising, vocabulary, padding and categorical oversampling."""
from __future__ import annotations

import csv
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAD_ID = 0
STRIP_CHARS = frozenset("-@#()")
LABEL_TOKENS = {"0": 0, "1": 1, "real": 0, "fake": 1}

_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION = re.compile(r"(?<!\S)@\S+")
# punctuation that separates tokens; the strip set is handled per token
_SPLIT = re.compile(r"[\s.,;:!?\"'`/\\|\[\]{}<>=+*&%$~^_…“”‘’]+")
_STRIP = re.compile("[" + re.escape("".join(sorted(STRIP_CHARS))) + "]")


class CorpusError(ValueError):
    pass


class EmptyVocabularyError(CorpusError):
    pass


@dataclass(frozen=True)
class RawDocument:
    text: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise CorpusError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class TokenizerConfig:
    stopwords: frozenset = frozenset()

    @classmethod
    def from_file(cls, path) -> "TokenizerConfig":
        words = Path(path).read_text(encoding="utf-8").split("\n")
        return cls(frozenset(w.strip().lower() for w in words if w.strip()))


def tokenize(text: str, cfg: TokenizerConfig | None = None) -> list[str]:
    """Lowercased ASCII-alphabetic tokens in their original order.

    URLs and @-mentions are removed whole; the characters ``- @ # ( )`` are
    deleted from the remaining tokens.  Anything still containing a
    non-ASCII-letter is dropped, as are stopwords.
    """
    stop = cfg.stopwords if cfg is not None else frozenset()
    text = _MENTION.sub(" ", _URL.sub(" ", text))
    out = []
    for raw in _SPLIT.split(text.lower()):
        tok = _STRIP.sub("", raw)
        if tok and tok.isascii() and tok.isalpha() and tok not in stop:
            out.append(tok)
    return out


@dataclass
class Vocabulary:
    """Bijection between tokens and ids ``1..size``; id 0 is padding."""

    itos: list[str] = field(default_factory=lambda: [""])
    stoi: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Vocabulary":
        vocab = cls()
        for tok in tokens:
            if tok in vocab.stoi:
                raise CorpusError(f"duplicate vocabulary token {tok!r}")
            vocab.stoi[tok] = len(vocab.itos)
            vocab.itos.append(tok)
        return vocab

    @property
    def size(self) -> int:
        return len(self.itos) - 1

    def __len__(self) -> int:
        return self.size

    def __contains__(self, token) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi[token]

    def token(self, idx: int) -> str:
        if not 1 <= idx <= self.size:
            raise IndexError(f"token id {idx} outside 1..{self.size}")
        return self.itos[idx]

    def encode(self, tokens: Iterable[str]) -> tuple[int, ...]:
        """Map tokens to ids, skipping out-of-vocabulary tokens."""
        return tuple(self.stoi[t] for t in tokens if t in self.stoi)

    def tokens(self) -> list[str]:
        return self.itos[1:]

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.itos[1:]).encode("utf-8")).hexdigest()


def build_vocabulary(token_docs: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    if min_count < 1:
        raise CorpusError("min_count must be >= 1")
    counts: dict[str, int] = {}
    for doc in token_docs:
        for tok in doc:
            counts[tok] = counts.get(tok, 0) + 1
    # dicts keep insertion order, i.e. first occurrence
    kept = [t for t, c in counts.items() if c >= min_count]
    if not kept:
        raise EmptyVocabularyError(f"no token occurs at least {min_count} time(s)")
    return Vocabulary.from_tokens(kept)


@dataclass
class Corpus:
    """Labelled id sequences sharing one vocabulary and padding length."""

    docs: list[tuple[int, ...]]
    labels: np.ndarray
    vocab: Vocabulary
    max_len: int = 0

    def __post_init__(self):
        self.docs = [tuple(int(i) for i in d) for d in self.docs]
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(self.docs) != len(self.labels):
            raise CorpusError(f"{len(self.docs)} docs but {len(self.labels)} labels")
        if len(self.docs) == 0:
            raise CorpusError("corpus is empty")
        if not np.isin(self.labels, (0, 1)).all():
            raise CorpusError("labels must be 0 or 1")
        for d in self.docs:
            if d and (min(d) < 1 or max(d) > self.vocab.size):
                raise CorpusError(f"token id outside 1..{self.vocab.size}")
        if self.max_len <= 0:
            self.max_len = max(1, max(len(d) for d in self.docs))

    @property
    def n_docs(self) -> int:
        return len(self.docs)

    def __len__(self) -> int:
        return len(self.docs)

    def lengths(self) -> np.ndarray:
        return np.array([len(d) for d in self.docs], dtype=np.int64)

    def padded(self, L: int | None = None) -> np.ndarray:
        L = self.max_len if L is None else L
        return np.array([pad_sequence(d, L) for d in self.docs], dtype=np.int64).reshape(len(self.docs), L)

    def subset(self, idx) -> "Corpus":
        idx = np.asarray(idx, dtype=np.int64)
        return Corpus([self.docs[i] for i in idx], self.labels[idx], self.vocab, self.max_len)

    def class_counts(self) -> tuple[int, int]:
        n1 = int(self.labels.sum())
        return len(self.labels) - n1, n1


def corpus_from_texts(texts: Sequence[str], labels: Sequence[int],
                      cfg: TokenizerConfig | None = None, min_count: int = 1) -> Corpus:
    token_docs = [tokenize(t, cfg) for t in texts]
    vocab = build_vocabulary(token_docs, min_count)
    return Corpus([vocab.encode(d) for d in token_docs], np.asarray(labels), vocab)


def pad_sequence(seq: Sequence[int], L: int) -> np.ndarray:
    """First ``min(len(seq), L)`` ids followed by zeros, length exactly ``L``."""
    if L < 1:
        raise CorpusError("padding length must be >= 1")
    out = np.zeros(L, dtype=np.int64)
    head = list(seq)[:L]
    out[:len(head)] = head
    return out


def _group_mode(group: np.ndarray, seed_row: np.ndarray) -> np.ndarray:
    out = seed_row.copy()
    for j in range(group.shape[1]):
        values, counts = np.unique(group[:, j], return_counts=True)
        best = counts.max()
        if counts[values == seed_row[j]][0] == best:
            continue
        out[j] = values[counts == best][0]
    return out


def smoten_oversample(corpus: Corpus, k: int = 5, seed: int = 0) -> Corpus:
    """Balance classes by synthesising minority documents (categorical SMOTE).

    Each synthetic document takes a random minority seed, its ``k`` nearest
    minority neighbours under Hamming distance on the padded id vectors, and
    the position-wise mode of that group (ties keep the seed's value).  The
    synthetic vector is cut at its first pad id.
    """
    n0, n1 = corpus.class_counts()
    if n0 == 0 or n1 == 0:
        raise CorpusError("oversampling needs both classes present")
    if n0 == n1:
        return corpus
    minority = 0 if n0 < n1 else 1
    n_new = abs(n1 - n0)
    idx = np.flatnonzero(corpus.labels == minority)
    if len(idx) <= k:
        raise CorpusError(f"minority class has {len(idx)} documents, need more than k={k}")

    X = corpus.padded()[idx]
    dist = (X[:, None, :] != X[None, :, :]).sum(axis=2)
    np.fill_diagonal(dist, np.iinfo(np.int64).max)
    neighbours = np.argsort(dist, axis=1, kind="stable")[:, :k]

    rng = np.random.default_rng(seed)
    new_docs = []
    for s in rng.integers(0, len(idx), size=n_new):
        group = np.vstack([X[s], X[neighbours[s]]])
        row = _group_mode(group, X[s])
        stop = np.flatnonzero(row == PAD_ID)
        row = row[:stop[0]] if len(stop) else row
        new_docs.append(tuple(int(v) for v in row))

    labels = np.concatenate([corpus.labels, np.full(n_new, minority, dtype=np.int64)])
    return Corpus(corpus.docs + new_docs, labels, corpus.vocab, corpus.max_len)


def load_csv(path, text_column: str = "text", label_column: str = "label") -> list[RawDocument]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (text_column, label_column) if c not in header]
        if missing:
            raise CorpusError(f"{path}: header lacks column(s) {missing}")
        docs = []
        for row in reader:
            line = reader.line_num
            text, label = row.get(text_column), row.get(label_column)
            if text is None or label is None or None in row:
                raise CorpusError(f"{path}: malformed row at line {line}")
            token = label.strip().lower()
            if token not in LABEL_TOKENS:
                raise CorpusError(f"{path}: unknown label {label!r} at line {line}")
            docs.append(RawDocument(text, LABEL_TOKENS[token]))
    return docs


def load_stopwords(path) -> frozenset:
    return TokenizerConfig.from_file(path).stopwords
