"""Supervised Bi-LSTM variational autoencoder.

Encoder: Bi-LSTM over the embedded sequence, the final forward state and the
final backward state are concatenated and mapped densely to ``(mu, log sigma)``.
Decoder: ``z`` goes through a dense tanh layer, is repeated at every position,
run through a second Bi-LSTM and projected to per-position logits over the
vocabulary (ids ``1..|V|``; padding is not a predictable symbol).
Classifier head: ``sigmoid(mu @ w + b)``.

Graph-level operations accept numpy arrays or :class:`~ldavae.autodiff.Node`
values and return Nodes; read ``.value`` for the numbers.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .corpus import PAD_ID, Corpus
from .embedding import EmbeddingMatrix

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
PROB_FLOOR = 1e-12


class VaeError(ValueError):
    pass


class DivergenceError(VaeError):
    pass


@dataclass
class LstmCell:
    """Gate blocks along the 4*hidden axis are ordered forget, input, output, candidate."""

    W: object  # hidden x 4*hidden, recurrence
    U: object  # input x 4*hidden
    b: object  # 4*hidden

    @property
    def hidden(self) -> int:
        return ad.constant(self.W).shape[0]

    @property
    def input_dim(self) -> int:
        return ad.constant(self.U).shape[0]

    def nodes(self) -> "LstmCell":
        return LstmCell(ad.constant(self.W), ad.constant(self.U), ad.constant(self.b))


@dataclass
class BiLstm:
    forward: LstmCell
    backward: LstmCell


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    clip: float = 5.0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.clip > 0:
            raise VaeError("epochs and batch_size must be >= 1 and clip > 0")


@dataclass
class VaeModel:
    vocab_size: int
    embed_dim: int = 32
    seq_len: int = 36
    hidden: int = 32
    n_f: int = 32
    params: dict = field(default_factory=dict)
    vocab_digest: str = ""
    history: list = field(default_factory=list)

    # parameter names in a fixed order; the optimiser state follows it
    NAMES = ("enc_f_W", "enc_f_U", "enc_f_b", "enc_b_W", "enc_b_U", "enc_b_b",
             "enc_out_W", "enc_out_b", "dec_in_W", "dec_in_b",
             "dec_f_W", "dec_f_U", "dec_f_b", "dec_b_W", "dec_b_U", "dec_b_b",
             "dec_out_W", "dec_out_b", "cls_W", "cls_b")

    def shapes(self) -> dict:
        w, h, nf, V = self.embed_dim, self.hidden, self.n_f, self.vocab_size
        return {
            "enc_f_W": (h, 4 * h), "enc_f_U": (w, 4 * h), "enc_f_b": (4 * h,),
            "enc_b_W": (h, 4 * h), "enc_b_U": (w, 4 * h), "enc_b_b": (4 * h,),
            "enc_out_W": (2 * h, 2 * nf), "enc_out_b": (2 * nf,),
            "dec_in_W": (nf, h), "dec_in_b": (h,),
            "dec_f_W": (h, 4 * h), "dec_f_U": (h, 4 * h), "dec_f_b": (4 * h,),
            "dec_b_W": (h, 4 * h), "dec_b_U": (h, 4 * h), "dec_b_b": (4 * h,),
            "dec_out_W": (2 * h, V), "dec_out_b": (V,),
            "cls_W": (nf, 1), "cls_b": (1,),
        }

    def nodes(self, trainable: bool = False) -> dict:
        make = ad.parameter if trainable else ad.constant
        return {k: make(self.params[k]) for k in self.NAMES}


def init_vae(vocab_size: int, embed_dim: int = 32, seq_len: int = 36, hidden: int = 32,
             n_f: int = 32, seed: int = 0, vocab_digest: str = "") -> VaeModel:
    """Glorot-uniform weights, zero biases except a forget-gate bias of one."""
    model = VaeModel(vocab_size, embed_dim, seq_len, hidden, n_f, vocab_digest=vocab_digest)
    rng = np.random.default_rng(seed)
    for name in model.NAMES:
        shape = model.shapes()[name]
        if len(shape) == 1:
            p = np.zeros(shape)
            if name.endswith("_b") and name[:5] in ("enc_f", "enc_b", "dec_f", "dec_b"):
                p[:hidden] = 1.0
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            p = rng.uniform(-limit, limit, size=shape)
        model.params[name] = p
    return model


def _cell(P: dict, prefix: str) -> LstmCell:
    return LstmCell(P[prefix + "_W"], P[prefix + "_U"], P[prefix + "_b"])


# ---------------------------------------------------------------------------
# recurrent pieces

def _step(cell: LstmCell, s_prev: Node, c_prev: Node, xu: Node):
    h = cell.hidden
    a = s_prev @ cell.W + xu + cell.b
    gates = ad.sigmoid(a[:, :3 * h])
    f, i, o = gates[:, :h], gates[:, h:2 * h], gates[:, 2 * h:]
    cand = ad.tanh(a[:, 3 * h:])
    c = f * c_prev + i * cand
    s = o * ad.tanh(c)
    return s, c


def _lift(x) -> tuple[Node, bool]:
    x = ad.constant(x)
    if x.value.ndim == 1:
        return ad.reshape(x, (1, -1)), True
    return x, False


def lstm_forward_step(cell: LstmCell, s_prev, c_prev, x):
    """One left-to-right step; returns ``(s_j, c_j)``. Accepts vectors or row batches."""
    cell = cell.nodes()
    s_prev, single = _lift(s_prev)
    c_prev, _ = _lift(c_prev)
    x, _ = _lift(x)
    if x.shape[1] != cell.input_dim or s_prev.shape[1] != cell.hidden or c_prev.shape != s_prev.shape:
        raise ad.ShapeError(f"lstm step: input {x.shape}/state {s_prev.shape} do not fit cell "
                            f"(input {cell.input_dim}, hidden {cell.hidden})")
    s, c = _step(cell, s_prev, c_prev, x @ cell.U)
    if single:
        s, c = ad.reshape(s, (-1,)), ad.reshape(c, (-1,))
    return s, c


def lstm_backward_step(cell: LstmCell, s_next, c_next, x):
    """Right-to-left step: same recurrence, fed the state of position ``j + 1``."""
    return lstm_forward_step(cell, s_next, c_next, x)


def _run_bilstm(layer: BiLstm, xus_f: list, xus_b: list, batch: int):
    fwd, bwd = layer.forward, layer.backward
    L = len(xus_f)
    h = fwd.hidden
    zero = ad.constant(np.zeros((batch, h)))
    s, c = zero, zero
    fwd_states = []
    for j in range(L):
        s, c = _step(fwd, s, c, xus_f[j])
        fwd_states.append(s)
    s, c = zero, zero
    bwd_states = [None] * L
    for j in reversed(range(L)):
        s, c = _step(bwd, s, c, xus_b[j])
        bwd_states[j] = s
    return fwd_states, bwd_states


def _check_seq(layer: BiLstm, X: Node):
    if X.value.ndim != 3 or X.shape[2] != layer.forward.input_dim:
        raise ad.ShapeError(f"bilstm: input {X.shape} does not match input dim {layer.forward.input_dim}")


def _bilstm_states(layer: BiLstm, X: Node):
    """X: B x L x in (Node). Per-position forward and backward states."""
    _check_seq(layer, X)
    B, L, _ = X.shape
    xs = [X[:, j, :] for j in range(L)]
    xus_f = [x @ layer.forward.U for x in xs]
    xus_b = [x @ layer.backward.U for x in xs]
    return _run_bilstm(layer, xus_f, xus_b, B)


def bilstm_sequence(layer: BiLstm, X):
    """tau_j = [s_j, s'_j]; returns L x 2h (or B x L x 2h for a batch)."""
    layer = BiLstm(layer.forward.nodes(), layer.backward.nodes())
    X = ad.constant(X)
    single = X.value.ndim == 2
    if single:
        X = ad.reshape(X, (1,) + X.shape)
    fwd, bwd = _bilstm_states(layer, X)
    B, L = X.shape[0], X.shape[1]
    h2 = 2 * layer.forward.hidden
    taus = [ad.reshape(ad.concat([f, b], axis=1), (B, 1, h2)) for f, b in zip(fwd, bwd)]
    out = ad.concat(taus, axis=1)
    return ad.reshape(out, (L, h2)) if single else out


# ---------------------------------------------------------------------------
# encoder / decoder / head

def _encode_batch(model: VaeModel, P: dict, X: Node):
    layer = BiLstm(_cell(P, "enc_f"), _cell(P, "enc_b"))
    fwd, bwd = _bilstm_states(layer, X)
    summary = ad.concat([fwd[-1], bwd[0]], axis=1)
    head = summary @ P["enc_out_W"] + P["enc_out_b"]
    nf = model.n_f
    mu, log_sigma = head[:, :nf], head[:, nf:]
    if not (np.isfinite(mu.value).all() and np.isfinite(log_sigma.value).all()):
        raise DivergenceError("encoder produced a non-finite activation")
    return mu, log_sigma


def encode(model: VaeModel, X, params: dict | None = None):
    """``(mu, sigma)`` for an L x w input (or a B x L x w batch)."""
    P = params if params is not None else model.nodes()
    X = ad.constant(X)
    single = X.value.ndim == 2
    if single:
        X = ad.reshape(X, (1,) + X.shape)
    if X.shape[1:] != (model.seq_len, model.embed_dim):
        raise ad.ShapeError(f"encode: expected L x w = {(model.seq_len, model.embed_dim)}, got {X.shape[1:]}")
    mu, log_sigma = _encode_batch(model, P, X)
    sigma = ad.exp(log_sigma)
    if single:
        return ad.reshape(mu, (-1,)), ad.reshape(sigma, (-1,))
    return mu, sigma


def reparameterize(mu, sigma, rng: np.random.Generator) -> Node:
    mu, sigma = ad.constant(mu), ad.constant(sigma)
    if not (sigma.value > 0).all():
        raise VaeError("sigma must be strictly positive")
    eps = rng.standard_normal(mu.shape)
    return mu + sigma * eps


def _decode_logits(model: VaeModel, P: dict, z: Node) -> Node:
    """Position-major logits: row ``j * B + b`` holds position j of batch item b."""
    d = ad.tanh(z @ P["dec_in_W"] + P["dec_in_b"])
    layer = BiLstm(_cell(P, "dec_f"), _cell(P, "dec_b"))
    du_f = d @ layer.forward.U
    du_b = d @ layer.backward.U
    L = model.seq_len
    fwd, bwd = _run_bilstm(layer, [du_f] * L, [du_b] * L, z.shape[0])
    tau = ad.concat([ad.concat([f, b], axis=1) for f, b in zip(fwd, bwd)], axis=0)
    return tau @ P["dec_out_W"] + P["dec_out_b"]


def decode(model: VaeModel, z, params: dict | None = None) -> Node:
    """Per-position probabilities over ids 1..|V|: L x |V| (or B x L x |V|)."""
    P = params if params is not None else model.nodes()
    z, single = _lift(z)
    if z.shape[1] != model.n_f:
        raise ad.ShapeError(f"decode: latent has {z.shape[1]} dims, model has n_f={model.n_f}")
    B = z.shape[0]
    probs = ad.softmax_rows(_decode_logits(model, P, z))
    # position-major rows -> B x L x V
    out = ad.concat([ad.reshape(probs[j * B:(j + 1) * B], (B, 1, model.vocab_size))
                     for j in range(model.seq_len)], axis=1)
    return ad.reshape(out, (model.seq_len, model.vocab_size)) if single else out


def classify_head(model: VaeModel, mu, params: dict | None = None) -> Node:
    P = params if params is not None else model.nodes()
    mu, single = _lift(mu)
    y_hat = ad.sigmoid(mu @ P["cls_W"] + P["cls_b"])
    return ad.reshape(y_hat, (-1,))


# ---------------------------------------------------------------------------
# losses

def loss_cross_entropy(probs, targets) -> Node:
    """-sum over non-pad positions of log p(target); probabilities floored at 1e-12."""
    probs = ad.constant(probs)
    targets = np.asarray(targets, dtype=np.int64)
    if probs.shape[:-1] != targets.shape:
        raise ad.ShapeError(f"cross entropy: probs {probs.shape} vs targets {targets.shape}")
    if targets.size and targets.max() > probs.shape[-1]:
        raise VaeError("target id outside the vocabulary")
    idx = np.nonzero(targets != PAD_ID)
    if len(idx[0]) == 0:
        return ad.constant(0.0)
    picked = probs[idx + (targets[idx] - 1,)]
    return -ad.sum(ad.log(ad.clamp_min(picked, PROB_FLOOR)))


def loss_kl(mu, sigma) -> Node:
    """KL(N(mu, sigma^2) || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 2 log sigma - 1)."""
    mu, sigma = ad.constant(mu), ad.constant(sigma)
    terms = mu * mu + sigma * sigma - 2.0 * ad.log(sigma) - 1.0
    return 0.5 * ad.sum(terms)


def loss_reconstruction(probs, targets, mu, sigma) -> Node:
    return loss_cross_entropy(probs, targets) + loss_kl(mu, sigma)


def loss_classifier(y, y_hat) -> Node:
    """Binary cross entropy summed over items, y_hat clamped to [1e-12, 1 - 1e-12]."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = ad.constant(y_hat)
    lo, hi = PROB_FLOOR, 1.0 - PROB_FLOOR
    p = ad.clamp_min(y_hat, lo)
    q = ad.clamp_min(1.0 - y_hat, 1.0 - hi)
    return -ad.sum(y * ad.log(p) + (1.0 - y) * ad.log(q))


def _batch_objective(model: VaeModel, P: dict, X: np.ndarray, ids: np.ndarray,
                     y: np.ndarray, rng: np.random.Generator):
    """Summed (over the batch) CE, KL and BCE terms plus head predictions."""
    B = X.shape[0]
    mu, log_sigma = _encode_batch(model, P, ad.constant(X))
    sigma = ad.exp(log_sigma)
    z = reparameterize(mu, sigma, rng)
    logp = ad.log_softmax_rows(_decode_logits(model, P, z))
    flat = ids.T.reshape(-1)  # position-major, matching the logits rows
    rows = np.flatnonzero(flat != PAD_ID)
    ce = -ad.sum(logp[(rows, flat[rows] - 1)]) if len(rows) else ad.constant(0.0)
    kl = 0.5 * ad.sum(mu * mu + ad.exp(2.0 * log_sigma) - 2.0 * log_sigma - 1.0)
    y_hat = classify_head(model, mu, P)
    bc = loss_classifier(y, y_hat)
    return ce, kl, bc, y_hat.value, B


# ---------------------------------------------------------------------------
# training / features

def embed_corpus(corpus: Corpus, E: EmbeddingMatrix, L: int) -> tuple[np.ndarray, np.ndarray]:
    ids = corpus.padded(L)
    if ids.max(initial=0) > E.size:
        raise VaeError("embedding table does not cover the vocabulary")
    return E.table()[ids], ids


def train_vae(corpus: Corpus, embeddings: EmbeddingMatrix, model: VaeModel,
              cfg: TrainConfig | None = None) -> VaeModel:
    """Minimise the batch mean of CE + KL + BCE with Adam and global-norm clipping.

    Returns a new model; ``history`` holds one record per epoch with the mean
    per-document losses and the classifier-head accuracy seen during the epoch.
    """
    cfg = cfg or TrainConfig()
    if embeddings.dim != model.embed_dim or corpus.vocab.size != model.vocab_size:
        raise VaeError("model dimensions do not match corpus/embeddings")
    X_all, ids_all = embed_corpus(corpus, embeddings, model.seq_len)
    y_all = corpus.labels.astype(np.float64)
    n = corpus.n_docs
    rng = np.random.default_rng(cfg.seed)
    params = [model.params[k].copy() for k in model.NAMES]
    state = None
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        sums = np.zeros(3)
        correct = 0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            P = {k: ad.parameter(p) for k, p in zip(model.NAMES, params)}
            ce, kl, bc, y_hat, B = _batch_objective(
                model, P, X_all[batch], ids_all[batch], y_all[batch], rng)
            total = (ce + kl + bc) * (1.0 / B)
            if not np.isfinite(total.value):
                raise DivergenceError(f"loss became non-finite at epoch {epoch}")
            ad.backward(total)
            grads = ad.clip_by_global_norm(
                [P[k].grad if P[k].grad is not None else np.zeros_like(P[k].value) for k in model.NAMES],
                cfg.clip)
            params, state = ad.adam_step(params, grads, state, cfg.lr)
            sums += [float(ce.value), float(kl.value), float(bc.value)]
            correct += int(((y_hat >= 0.5).astype(int) == y_all[batch]).sum())
        ce_m, kl_m, bc_m = sums / n
        rec = {"epoch": epoch, "loss": float(ce_m + kl_m + bc_m), "ce": float(ce_m),
               "kl": float(kl_m), "bc": float(bc_m), "accuracy": correct / n}
        history.append(rec)
        log.debug("epoch %d loss %.4f acc %.3f", epoch, rec["loss"], rec["accuracy"])
    trained = VaeModel(model.vocab_size, model.embed_dim, model.seq_len, model.hidden,
                       model.n_f, dict(zip(model.NAMES, params)),
                       model.vocab_digest or corpus.vocab.digest(), model.history + history)
    return trained


def extract_latent_features(model: VaeModel, corpus: Corpus, embeddings: EmbeddingMatrix,
                            batch_size: int = 256) -> np.ndarray:
    """Posterior means, one row per document in corpus order."""
    X_all, _ = embed_corpus(corpus, embeddings, model.seq_len)
    P = model.nodes()
    rows = []
    for start in range(0, len(X_all), batch_size):
        mu, _ = _encode_batch(model, P, ad.constant(X_all[start:start + batch_size]))
        rows.append(mu.value)
    return np.vstack(rows)


def predict_head(model: VaeModel, corpus: Corpus, embeddings: EmbeddingMatrix) -> np.ndarray:
    mu = extract_latent_features(model, corpus, embeddings)
    return classify_head(model, mu).value


# ---------------------------------------------------------------------------
# checkpoints

def save_vae(model: VaeModel, path) -> None:
    blob = {
        "format": "ldavae-vae", "version": CHECKPOINT_VERSION,
        "dims": {"vocab_size": model.vocab_size, "embed_dim": model.embed_dim,
                 "seq_len": model.seq_len, "hidden": model.hidden, "n_f": model.n_f},
        "vocab_digest": model.vocab_digest,
        "params": {k: {"shape": list(model.params[k].shape),
                       "values": model.params[k].ravel().tolist()} for k in model.NAMES},
        "history": model.history,
    }
    Path(path).write_text(json.dumps(blob, sort_keys=True), encoding="utf-8")


def load_vae(path) -> VaeModel:
    blob = json.loads(Path(path).read_text(encoding="utf-8"))
    if blob.get("format") != "ldavae-vae" or blob.get("version") != CHECKPOINT_VERSION:
        raise VaeError(f"{path}: not a version {CHECKPOINT_VERSION} VAE checkpoint")
    params = {k: np.array(v["values"], dtype=np.float64).reshape(v["shape"])
              for k, v in blob["params"].items()}
    return VaeModel(**blob["dims"], params=params, vocab_digest=blob["vocab_digest"],
                    history=blob.get("history", []))


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
