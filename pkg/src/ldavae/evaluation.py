"""Classification metrics (fake = positive class), splitting and the ablation harness."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import Corpus
from .features import KINDS, fit_classifier

FEATURE_SETS = ("VAE", "LDA", "LDAVAE")
METRIC_NAMES = ("accuracy", "f1", "fpr", "fnr")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class MetricsReport:
    """Undefined metrics are ``None`` with the cause recorded in ``undefined``."""

    counts: ConfusionCounts
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    fpr: float | None
    fnr: float | None
    undefined: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["counts"] = asdict(self.counts)
        return d


def _binary(name: str, v) -> np.ndarray:
    a = np.asarray(v).reshape(-1)
    if not np.isin(a, (0, 1)).all():
        raise EvaluationError(f"{name} contains labels other than 0/1")
    return a.astype(np.int64)


def confusion(y_true, y_pred) -> ConfusionCounts:
    t, p = _binary("y_true", y_true), _binary("y_pred", y_pred)
    if len(t) != len(p):
        raise EvaluationError(f"length mismatch: {len(t)} labels vs {len(p)} predictions")
    return ConfusionCounts(tp=int(np.sum((t == 1) & (p == 1))), tn=int(np.sum((t == 0) & (p == 0))),
                           fp=int(np.sum((t == 0) & (p == 1))), fn=int(np.sum((t == 1) & (p == 0))))


def metrics(c: ConfusionCounts) -> MetricsReport:
    undefined = {}

    def ratio(name, num, den, why):
        if den == 0:
            undefined[name] = why
            return None
        return num / den

    accuracy = ratio("accuracy", c.tp + c.tn, c.total, "no samples")
    precision = ratio("precision", c.tp, c.tp + c.fp, "no predicted positives (TP+FP=0)")
    recall = ratio("recall", c.tp, c.tp + c.fn, "no actual positives (TP+FN=0)")
    if precision is None or recall is None:
        f1 = None
        undefined["f1"] = "precision or recall undefined"
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    fpr = ratio("fpr", c.fp, c.tn + c.fp, "no actual negatives (TN+FP=0)")
    fnr = ratio("fnr", c.fn, c.fn + c.tp, "no actual positives (FN+TP=0)")
    return MetricsReport(c, accuracy, precision, recall, f1, fpr, fnr, undefined)


def evaluate(y_true, y_pred) -> MetricsReport:
    return metrics(confusion(y_true, y_pred))


# ---------------------------------------------------------------------------
# splitting

def _allocate(sizes: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder apportionment of ``total`` over groups of ``sizes``."""
    exact = sizes * (total / sizes.sum())
    base = np.floor(exact).astype(np.int64)
    rest = total - base.sum()
    # larger remainder first, then larger group, then lower group index
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - base[i]), -sizes[i], i))
    for i in order[:rest]:
        base[i] += 1
    return np.minimum(base, sizes)


def split_indices(labels, train_fraction: float = 0.9, stratified: bool = True, seed: int = 0):
    """Disjoint (train, test) index arrays, each sorted ascending."""
    labels = np.asarray(labels).reshape(-1)
    if not 0.0 < train_fraction < 1.0:
        raise EvaluationError("train_fraction must lie strictly between 0 and 1")
    n = len(labels)
    n_train = int(np.floor(train_fraction * n + 0.5))
    rng = np.random.default_rng(seed)
    if stratified:
        classes = np.unique(labels)
        groups = [np.flatnonzero(labels == c) for c in classes]
        quota = _allocate(np.array([len(g) for g in groups]), n_train)
        train = np.concatenate([rng.permutation(g)[:q] for g, q in zip(groups, quota)])
    else:
        train = rng.permutation(n)[:n_train]
    train = np.sort(train)
    test = np.setdiff1d(np.arange(n), train)
    if len(train) == 0 or len(test) == 0:
        raise EvaluationError(f"degenerate split: {len(train)} train / {len(test)} test")
    return train, test


def split(corpus: Corpus, train_fraction: float = 0.9, stratified: bool = True, seed: int = 0):
    train, test = split_indices(corpus.labels, train_fraction, stratified, seed)
    return corpus.subset(train), corpus.subset(test)


def index_hash(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.asarray(a, dtype=np.int64).tobytes())
        h.update(b"|")
    return h.hexdigest()


# ---------------------------------------------------------------------------
# ablation

@dataclass
class AblationTable:
    cells: dict  # (kind, feature set) -> MetricsReport
    split_hash: str
    n_train: int
    n_test: int
    kinds: tuple
    cell_hashes: dict = field(default_factory=dict)
    dataset: str = "dataset"

    def value(self, kind: str, feature_set: str, metric: str):
        return getattr(self.cells[(kind, feature_set)], metric)

    def rows(self):
        for kind in self.kinds:
            for metric in METRIC_NAMES:
                yield kind, metric, [self.value(kind, fs, metric) for fs in FEATURE_SETS]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["classifier", "metric"] + [f"{self.dataset}/{fs}" for fs in FEATURE_SETS])
        for kind, metric, vals in self.rows():
            w.writerow([kind, metric] + ["" if v is None else repr(float(v)) for v in vals])
        return buf.getvalue()

    def to_json(self) -> str:
        blob = {
            "dataset": self.dataset, "split_hash": self.split_hash,
            "n_train": self.n_train, "n_test": self.n_test,
            "feature_sets": list(FEATURE_SETS), "metrics": list(METRIC_NAMES),
            "rows": [{"classifier": k, "metric": m, "values": dict(zip(FEATURE_SETS, v))}
                     for k, m, v in self.rows()],
            "counts": {f"{k}/{fs}": asdict(self.cells[(k, fs)].counts)
                       for k in self.kinds for fs in FEATURE_SETS},
        }
        return json.dumps(blob, indent=1, sort_keys=True)


def ablate(corpus_or_labels, lda_feats, vae_feats, kinds=KINDS, seed: int = 0,
           train_fraction: float = 0.9, split=None, hyper: dict | None = None,
           dataset: str = "dataset") -> AblationTable:
    """Fit and score every classifier on the VAE span, the LDA span and both.

    ``split`` may pass precomputed ``(train_idx, test_idx)``; otherwise a
    stratified split is drawn from ``seed``.  All cells share it.
    """
    labels = corpus_or_labels.labels if isinstance(corpus_or_labels, Corpus) else np.asarray(corpus_or_labels)
    labels = labels.astype(np.int64).reshape(-1)
    lda = np.asarray(lda_feats, dtype=np.float64)
    vae = np.asarray(vae_feats, dtype=np.float64)
    if not (len(labels) == len(lda) == len(vae)):
        raise EvaluationError("features and labels are not row-aligned")
    train, test = split if split is not None else split_indices(labels, train_fraction, True, seed)
    train, test = np.asarray(train), np.asarray(test)
    spans = {"VAE": vae, "LDA": lda, "LDAVAE": np.hstack([vae, lda])}
    hyper = hyper or {}
    cells, hashes = {}, {}
    kinds = tuple(k.upper() for k in kinds)
    for kind in kinds:
        for fs in FEATURE_SETS:
            X = spans[fs]
            model = fit_classifier(kind, X[train], labels[train], hyper.get(kind), seed)
            pred, _ = model.predict(X[test])
            cells[(kind, fs)] = evaluate(labels[test], pred)
            hashes[(kind, fs)] = index_hash(train, test)
    return AblationTable(cells, index_hash(train, test), len(train), len(test), kinds, hashes, dataset)
