"""Feature concatenation and the six downstream classifiers.

Every classifier exposes ``fit(X, y)`` and ``predict(X) -> (labels, scores)``.
Scores are probabilities of the fake class except for the SVM, which returns
its margin.  A score of exactly 0.5 (margin 0) is labelled 1.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit, logsumexp

from . import autodiff as ad

KINDS = ("MLP", "SVM", "LR", "NB", "RF", "KNN")

DEFAULT_HYPER = {
    "MLP": {"hidden": 64, "epochs": 200, "lr": 1e-2, "batch_size": 32},
    "SVM": {"l2": 1e-4, "epochs": 200, "lr": 0.05, "batch_size": 32},
    "LR": {"l2": 1e-4, "epochs": 200, "lr": 0.1, "batch_size": 32},
    "NB": {"var_smoothing": 1e-9},
    "RF": {"n_trees": 100, "max_depth": 16, "min_samples_split": 2},
    "KNN": {"k": 5},
}


class ClassifierError(ValueError):
    pass


# ---------------------------------------------------------------------------
# feature matrices

@dataclass
class FeatureMatrix:
    values: np.ndarray
    n_vae: int
    n_lda: int

    @property
    def vae(self) -> np.ndarray:
        return self.values[:, :self.n_vae]

    @property
    def lda(self) -> np.ndarray:
        return self.values[:, self.n_vae:self.n_vae + self.n_lda]

    def columns(self) -> list[str]:
        return [f"vae_{i}" for i in range(self.n_vae)] + [f"lda_{i}" for i in range(self.n_lda)]

    def span(self, name: str) -> np.ndarray:
        return {"VAE": self.vae, "LDA": self.lda, "LDAVAE": self.values}[name]


def concat_features(vae_feats, lda_feats) -> FeatureMatrix:
    vae_feats = np.asarray(vae_feats, dtype=np.float64)
    lda_feats = np.asarray(lda_feats, dtype=np.float64)
    if vae_feats.ndim != 2 or lda_feats.ndim != 2:
        raise ClassifierError("feature blocks must be 2-D")
    if vae_feats.shape[0] != lda_feats.shape[0]:
        raise ClassifierError(f"row mismatch: {vae_feats.shape[0]} VAE rows vs {lda_feats.shape[0]} LDA rows")
    out = np.hstack([vae_feats, lda_feats])
    if not np.isfinite(out).all():
        raise ClassifierError("features must be finite")
    if lda_feats.shape[1] and not np.allclose(lda_feats.sum(axis=1), 1.0, rtol=0, atol=1e-9):
        raise ClassifierError("LDA feature rows must lie on the simplex")
    return FeatureMatrix(out, vae_feats.shape[1], lda_feats.shape[1])


def save_features_csv(path, fm: FeatureMatrix, labels=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fm.columns() + (["label"] if labels is not None else []))
        for i, row in enumerate(fm.values):
            cells = [repr(float(x)) for x in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            writer.writerow(cells)


def load_features_csv(path) -> tuple[FeatureMatrix, np.ndarray | None]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    has_label = header[-1] == "label"
    n_vae = sum(h.startswith("vae_") for h in header)
    n_lda = sum(h.startswith("lda_") for h in header)
    data = np.array([[float(x) for x in r[:n_vae + n_lda]] for r in body]).reshape(len(body), n_vae + n_lda)
    labels = np.array([int(r[-1]) for r in body], dtype=np.int64) if has_label else None
    return FeatureMatrix(data, n_vae, n_lda), labels


# ---------------------------------------------------------------------------
# helpers

def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ClassifierError(f"X {X.shape} and y ({len(y)},) do not align")
    if not np.isfinite(X).all():
        raise ClassifierError("features must be finite")
    if not np.isin(y, (0, 1)).all():
        raise ClassifierError("labels must be 0 or 1")
    return X, y


def _labels(scores: np.ndarray, threshold: float) -> np.ndarray:
    return (scores >= threshold).astype(np.int64)


class Standardizer:
    def fit(self, X):
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        return self

    def transform(self, X):
        return (X - self.mean_) / self.scale_

    def state(self) -> dict:
        return {"mean": self.mean_.tolist(), "scale": self.scale_.tolist()}

    @classmethod
    def from_state(cls, d) -> "Standardizer":
        s = cls()
        s.mean_, s.scale_ = np.array(d["mean"]), np.array(d["scale"])
        return s


class _Base:
    kind = ""
    threshold = 0.5

    def __init__(self, seed: int = 0, **hyper):
        unknown = set(hyper) - set(DEFAULT_HYPER[self.kind])
        if unknown:
            raise ClassifierError(f"{self.kind}: unknown hyperparameters {sorted(unknown)}")
        self.hyper = {**DEFAULT_HYPER[self.kind], **hyper}
        self.seed = seed
        self.n_features = None

    def _check_predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.n_features is None:
            raise ClassifierError(f"{self.kind}: predict before fit")
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ClassifierError(f"{self.kind}: expected {self.n_features} features, got {X.shape}")
        return X

    def predict(self, X):
        X = self._check_predict(X)
        scores = self.decision(X)
        return _labels(scores, self.threshold), scores

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "hyper": self.hyper,
                "n_features": self.n_features, "state": self._state()}


# ---------------------------------------------------------------------------
# linear models

class _LinearSGD(_Base):
    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.n_features = X.shape[1]
        self.scaler = Standardizer().fit(X)
        Z = self.scaler.transform(X)
        rng = np.random.default_rng(self.seed)
        n, d = Z.shape
        w, b = np.zeros(d), 0.0
        h = self.hyper
        step = 0
        for _ in range(h["epochs"]):
            order = rng.permutation(n)
            for start in range(0, n, h["batch_size"]):
                idx = order[start:start + h["batch_size"]]
                gw, gb = self._grad(Z[idx], y[idx], w, b)
                rate = h["lr"] / (1.0 + 1e-3 * step)
                w -= rate * (gw + h["l2"] * w)
                b -= rate * gb
                step += 1
        self.w, self.b = w, b
        return self

    def margin(self, X):
        return self.scaler.transform(X) @ self.w + self.b

    def _state(self):
        return {"w": self.w.tolist(), "b": self.b, "scaler": self.scaler.state()}

    def _load(self, s):
        self.w, self.b = np.array(s["w"]), s["b"]
        self.scaler = Standardizer.from_state(s["scaler"])


class LogisticRegression(_LinearSGD):
    kind = "LR"

    def _grad(self, Z, y, w, b):
        r = expit(Z @ w + b) - y
        return Z.T @ r / len(y), r.mean()

    def decision(self, X):
        return expit(self.margin(X))


class LinearSVM(_LinearSGD):
    kind = "SVM"
    threshold = 0.0

    def _grad(self, Z, y, w, b):
        s = 2.0 * y - 1.0
        active = s * (Z @ w + b) < 1.0
        coef = np.where(active, -s, 0.0)
        return Z.T @ coef / len(y), coef.mean()

    def decision(self, X):
        return self.margin(X)


# ---------------------------------------------------------------------------
# naive Bayes

class GaussianNB(_Base):
    kind = "NB"

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.n_features = X.shape[1]
        eps = self.hyper["var_smoothing"] * max(X.var(axis=0).max(), 1e-300)
        self.means = np.array([X[y == c].mean(axis=0) if (y == c).any() else np.zeros(X.shape[1]) for c in (0, 1)])
        self.vars = np.array([X[y == c].var(axis=0) + eps if (y == c).any() else np.ones(X.shape[1]) for c in (0, 1)])
        counts = np.array([(y == 0).sum(), (y == 1).sum()], dtype=np.float64)
        with np.errstate(divide="ignore"):
            self.log_prior = np.log(counts / counts.sum())
        return self

    def decision(self, X):
        ll = np.stack([
            -0.5 * np.sum(np.log(2 * np.pi * self.vars[c]) + (X - self.means[c]) ** 2 / self.vars[c], axis=1)
            + self.log_prior[c] for c in (0, 1)], axis=1)
        return np.exp(ll[:, 1] - logsumexp(ll, axis=1))

    def _state(self):
        return {"means": self.means.tolist(), "vars": self.vars.tolist(), "log_prior": self.log_prior.tolist()}

    def _load(self, s):
        self.means, self.vars, self.log_prior = (np.array(s[k]) for k in ("means", "vars", "log_prior"))


# ---------------------------------------------------------------------------
# random forest

def _gini_split(x: np.ndarray, y: np.ndarray):
    """Best threshold on one feature: (weighted child impurity, threshold) or None."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(ys)
    left_n = np.arange(1, n)
    left_pos = np.cumsum(ys)[:-1]
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    right_n = n - left_n
    right_pos = ys.sum() - left_pos
    pl = left_pos / left_n
    pr = right_pos / right_n
    imp = (left_n * 2 * pl * (1 - pl) + right_n * 2 * pr * (1 - pr)) / n
    imp = np.where(valid, imp, np.inf)
    i = int(np.argmin(imp))
    thr = 0.5 * (xs[i] + xs[i + 1])
    if not thr < xs[i + 1]:  # midpoint rounded up onto the right value
        thr = xs[i]
    return imp[i], thr


class DecisionTree:
    """CART tree on Gini impurity stored as flat arrays; leaves hold P(y = 1)."""

    def __init__(self, max_depth=16, min_samples_split=2, max_features=None, rng=None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.rng = rng or np.random.default_rng(0)

    def fit(self, X, y):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []
        d = X.shape[1]
        m = d if self.max_features is None else self.max_features
        stack = [(np.arange(len(y)), 0, self._new_node())]
        while stack:
            idx, depth, node = stack.pop()
            ys = y[idx]
            p = ys.mean()
            self.value[node] = p
            if depth >= self.max_depth or len(idx) < self.min_samples_split or p in (0.0, 1.0):
                continue
            parent = 2 * p * (1 - p)
            best = None
            for f in self.rng.choice(d, size=m, replace=False):
                found = _gini_split(X[idx, f], ys)
                if found is not None and (best is None or found[0] < best[0]):
                    best = (found[0], f, found[1])
            if best is None or best[0] >= parent:
                continue
            _, f, thr = best
            mask = X[idx, f] <= thr
            self.feature[node], self.threshold[node] = int(f), float(thr)
            left, right = self._new_node(), self._new_node()
            self.left[node], self.right[node] = left, right
            stack.append((idx[~mask], depth + 1, right))
            stack.append((idx[mask], depth + 1, left))
        self._freeze()
        return self

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.value) - 1

    def _freeze(self):
        self.feature = np.array(self.feature, dtype=np.int64)
        self.threshold = np.array(self.threshold)
        self.left = np.array(self.left, dtype=np.int64)
        self.right = np.array(self.right, dtype=np.int64)
        self.value = np.array(self.value)

    def predict_proba(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            internal = self.feature[node] >= 0
            if not internal.any():
                return self.value[node]
            rows = np.flatnonzero(internal)
            n = node[rows]
            go_left = X[rows, self.feature[n]] <= self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])

    def state(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_state(cls, s) -> "DecisionTree":
        t = cls()
        for k in ("feature", "left", "right"):
            setattr(t, k, np.array(s[k], dtype=np.int64))
        t.threshold, t.value = np.array(s["threshold"]), np.array(s["value"])
        return t


class RandomForest(_Base):
    """Bootstrap-bagged Gini trees, sqrt(d) candidate features per split.

    Works on single-class data as well (predicting that class everywhere).
    """

    kind = "RF"

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.n_features = X.shape[1]
        h = self.hyper
        m = max(1, int(np.sqrt(X.shape[1])))
        self.trees = []
        for child in np.random.SeedSequence(self.seed).spawn(h["n_trees"]):
            rng = np.random.default_rng(child)
            boot = rng.integers(0, len(y), size=len(y))
            tree = DecisionTree(h["max_depth"], h["min_samples_split"], m, rng)
            self.trees.append(tree.fit(X[boot], y[boot].astype(np.float64)))
        return self

    def decision(self, X):
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def _state(self):
        return {"trees": [t.state() for t in self.trees]}

    def _load(self, s):
        self.trees = [DecisionTree.from_state(t) for t in s["trees"]]


# ---------------------------------------------------------------------------
# nearest neighbours

class KNearestNeighbors(_Base):
    kind = "KNN"

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.n_features = X.shape[1]
        self.scaler = Standardizer().fit(X)
        self.Z, self.y = self.scaler.transform(X), y
        return self

    def decision(self, X):
        Q = self.scaler.transform(X)
        k = min(self.hyper["k"], len(self.y))
        out = np.empty(len(Q))
        for start in range(0, len(Q), 512):
            q = Q[start:start + 512]
            d2 = (q ** 2).sum(1)[:, None] - 2 * q @ self.Z.T + (self.Z ** 2).sum(1)[None, :]
            nn = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[start:start + 512] = self.y[nn].mean(axis=1)
        return out

    def _state(self):
        return {"Z": self.Z.tolist(), "y": self.y.tolist(), "scaler": self.scaler.state()}

    def _load(self, s):
        self.Z, self.y = np.array(s["Z"]), np.array(s["y"], dtype=np.int64)
        self.scaler = Standardizer.from_state(s["scaler"])


# ---------------------------------------------------------------------------
# multilayer perceptron

class MLP(_Base):
    """One ReLU hidden layer and a logistic output, trained with Adam on the mean BCE."""

    kind = "MLP"

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.n_features = X.shape[1]
        self.scaler = Standardizer().fit(X)
        Z = self.scaler.transform(X)
        h = self.hyper
        rng = np.random.default_rng(self.seed)
        d, H = Z.shape[1], h["hidden"]
        params = [rng.normal(0, np.sqrt(2.0 / d), (d, H)), np.zeros(H),
                  rng.normal(0, np.sqrt(1.0 / H), (H, 1)), np.zeros(1)]
        state = None
        yf = y.astype(np.float64)
        for _ in range(h["epochs"]):
            order = rng.permutation(len(y))
            for start in range(0, len(y), h["batch_size"]):
                idx = order[start:start + h["batch_size"]]
                nodes = [ad.parameter(p) for p in params]
                logit = self._forward(nodes, Z[idx])
                # BCE on logits: softplus(l) - y*l
                t = yf[idx][:, None]
                loss = ad.mean(_softplus(logit) - t * logit)
                ad.backward(loss)
                params, state = ad.adam_step(params, [n.grad for n in nodes], state, h["lr"])
        self.params = params
        return self

    @staticmethod
    def _forward(nodes, Z):
        W1, b1, W2, b2 = nodes
        return ad.relu(ad.constant(Z) @ W1 + b1) @ W2 + b2

    def decision(self, X):
        logit = self._forward([ad.constant(p) for p in self.params], self.scaler.transform(X))
        return expit(logit.value[:, 0])

    def _state(self):
        return {"params": [p.tolist() for p in self.params], "scaler": self.scaler.state()}

    def _load(self, s):
        self.params = [np.array(p) for p in s["params"]]
        self.scaler = Standardizer.from_state(s["scaler"])


def _softplus(x):
    # log(1 + e^x) = relu(x) + log(1 + e^-|x|)
    a = ad.relu(x) + ad.relu(-x)
    return ad.relu(x) + ad.log(1.0 + ad.exp(-a))


CLASSES = {c.kind: c for c in (MLP, LinearSVM, LogisticRegression, GaussianNB, RandomForest, KNearestNeighbors)}


def _kind(kind: str) -> str:
    k = kind.upper()
    if k not in CLASSES:
        raise ClassifierError(f"unknown classifier {kind!r}; choose from {KINDS}")
    return k


def fit_classifier(kind: str, X, y, hyper: dict | None = None, seed: int = 0):
    X, y = _check_xy(X, y)
    if len(np.unique(y)) < 2:
        raise ClassifierError("training data must contain both classes")
    return CLASSES[_kind(kind)](seed=seed, **(hyper or {})).fit(X, y)


def predict(model, X):
    return model.predict(X)


def classifier_to_dict(model) -> dict:
    return model.to_dict()


def classifier_from_dict(d: dict):
    model = CLASSES[_kind(d["kind"])](seed=d["seed"], **d["hyper"])
    model.n_features = d["n_features"]
    model._load(d["state"])
    return model


def save_classifier(model, path) -> None:
    Path(path).write_text(json.dumps(classifier_to_dict(model), sort_keys=True), encoding="utf-8")


def load_classifier(path):
    return classifier_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
