"""2-D projections of feature matrices: PCA and exact t-SNE."""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
MOMENTUM_SWITCH = 250
ENTROPY_TOL = 1e-5


class ProjectionError(ValueError):
    pass


@dataclass
class Projection2D:
    points: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if not np.isfinite(self.points).all():
            raise ProjectionError("projection has non-finite coordinates")

    def to_csv(self, labels=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "label"])
        labels = [""] * len(self.points) if labels is None else list(labels)
        for (x, y), lab in zip(self.points[:, :2], labels):
            w.writerow([repr(float(x)), repr(float(y)), lab])
        return buf.getvalue()

    def to_json(self) -> str:
        def plain(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, np.generic):
                return v.item()
            return v
        return json.dumps({"method": self.method, "meta": {k: plain(v) for k, v in self.meta.items()},
                           "points": self.points.tolist()}, indent=1, sort_keys=True)


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ProjectionError(f"expected an N x d matrix, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ProjectionError("input has non-finite entries")
    return X


# ---------------------------------------------------------------------------
# PCA

def sign_fix(components: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    C = np.array(components, dtype=np.float64)
    idx = np.argmax(np.abs(C), axis=1)
    signs = np.where(C[np.arange(len(C)), idx] < 0, -1.0, 1.0)
    return C * signs[:, None]


def pca_project(X, n_components: int = 2) -> Projection2D:
    X = _as_matrix(X)
    N, d = X.shape
    if N < 2:
        raise ProjectionError("PCA needs at least 2 samples")
    if d < n_components:
        raise ProjectionError(f"{d} features < {n_components} components")
    Xc = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    C = sign_fix(Vt[:n_components])
    var = (s ** 2 / (N - 1))[:n_components]
    if len(var) < n_components:
        var = np.concatenate([var, np.zeros(n_components - len(var))])
    scale = max(1.0, float(var[0]))
    if np.any(var <= 1e-12 * scale):
        warnings.warn("degenerate data: a principal variance is numerically zero", RuntimeWarning, stacklevel=2)
    total = float(np.sum(s ** 2) / (N - 1))
    return Projection2D(Xc @ C.T, "pca", {"components": C, "explained_variance": var,
                                          "explained_variance_ratio": var / total if total > 0 else np.zeros_like(var)})


# ---------------------------------------------------------------------------
# t-SNE

def _sq_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def _row_entropy(d: np.ndarray, beta: float):
    """Entropy (nats) and probabilities of exp(-beta * d), d already shifted to min 0."""
    w = np.exp(-beta * d)
    s = w.sum()
    p = w / s
    return np.log(s) + beta * float(np.dot(d, p)), p


def conditional_probabilities(X, perplexity: float, tol: float = ENTROPY_TOL, max_iter: int = 200):
    """Row-stochastic P_{j|i} and per-row entropies matched to log(perplexity)."""
    X = _as_matrix(X)
    D = _sq_distances(X)
    N = len(D)
    target = np.log(perplexity)
    P = np.zeros((N, N))
    H = np.zeros(N)
    for i in range(N):
        d = np.delete(D[i], i)
        d = d - d.min()
        lo, hi, beta = 0.0, np.inf, 1.0 / max(np.mean(d), 1e-12)
        h, p = _row_entropy(d, beta)
        for _ in range(max_iter):
            if abs(h - target) < tol:
                break
            if h > target:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
            h, p = _row_entropy(d, beta)
        P[i, np.arange(N) != i] = p
        H[i] = h
    return P, H


def _kl(P: np.ndarray, Q: np.ndarray) -> float:
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def _q_matrix(Y: np.ndarray):
    num = 1.0 / (1.0 + _sq_distances(Y))
    np.fill_diagonal(num, 0.0)
    return num, np.maximum(num / num.sum(), 1e-12)


def tsne_project(X, perplexity: float = 30.0, iterations: int = 1000, lr: float = 200.0,
                 seed: int = 0) -> Projection2D:
    """Exact t-SNE with early exaggeration, momentum and per-coordinate gains.

    ``meta["kl_trajectory"]`` holds the unexaggerated KL(P||Q) before each
    update and after the last one.
    """
    X = _as_matrix(X)
    N = len(X)
    if N < 4:
        raise ProjectionError(f"t-SNE needs at least 4 points, got {N}")
    if perplexity >= N:
        raise ProjectionError(f"perplexity {perplexity} must be below the number of points {N}")
    if perplexity > N - 1:
        raise ProjectionError(f"perplexity {perplexity} exceeds the attainable maximum N-1 = {N - 1}")
    if perplexity <= 1.0:
        raise ProjectionError("perplexity must exceed 1")

    Pc, H = conditional_probabilities(X, perplexity)
    P = np.maximum((Pc + Pc.T) / (2.0 * N), 1e-12)

    rng = np.random.default_rng(seed)
    Y = rng.normal(0.0, 1e-4, size=(N, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    trajectory = []
    for t in range(iterations):
        num, Q = _q_matrix(Y)
        trajectory.append(_kl(P, Q))
        exag = EXAGGERATION if t < EXAGGERATION_ITERS else 1.0
        W = (exag * P - Q) * num
        grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y
        momentum = 0.5 if t < MOMENTUM_SWITCH else 0.8
        same = np.sign(grad) == np.sign(update)
        gains = np.maximum(np.where(same, gains * 0.8, gains + 0.2), 0.01)
        update = momentum * update - lr * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
    _, Q = _q_matrix(Y)
    final = _kl(P, Q)
    trajectory.append(final)
    return Projection2D(Y, "tsne", {"kl": final, "perplexity": float(perplexity), "iterations": int(iterations),
                                    "kl_trajectory": np.array(trajectory), "entropy": H,
                                    "learning_rate": float(lr), "seed": int(seed)})
