"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Graphs are built eagerly (define-by-run): every primitive returns a new
:class:`Node` holding its value and a closure that maps the output gradient
to gradients for its parents.  :func:`backward` walks the graph once in
reverse topological order and accumulates into the ``grad`` of every leaf
that requires gradients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

__all__ = [
    "Node", "ShapeError", "AdamState", "constant", "parameter", "backward",
    "add", "sub", "mul", "neg", "matmul", "sigmoid", "tanh", "relu", "exp",
    "log", "clamp_min", "softmax_rows", "log_softmax_rows", "concat",
    "take", "sum", "mean", "reshape", "adam_step", "clip_by_global_norm",
]


class ShapeError(ValueError):
    pass


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Node:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad")
    # make numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, value, parents: tuple = (), backward_fn: Callable | None = None,
                 requires_grad: bool = False):
        self.value = _as_array(value)
        self.grad: np.ndarray | None = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Node(shape={self.value.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)


def constant(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def parameter(x) -> Node:
    return Node(np.array(x, dtype=np.float64), requires_grad=True)


def _make(value, parents: Sequence[Node], backward_fn) -> Node:
    needs = any(p.requires_grad for p in parents)
    return Node(value, tuple(parents), backward_fn if needs else None, needs)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(name: str, a: Node, b: Node) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{name}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# elementwise

def add(a, b) -> Node:
    a, b = constant(a), constant(b)
    _broadcast_shape("add", a, b)
    sa, sb = a.shape, b.shape
    return _make(a.value + b.value, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Node:
    a, b = constant(a), constant(b)
    _broadcast_shape("sub", a, b)
    sa, sb = a.shape, b.shape
    return _make(a.value - b.value, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Node:
    """Elementwise (Hadamard) product with numpy broadcasting."""
    a, b = constant(a), constant(b)
    _broadcast_shape("mul", a, b)
    av, bv = a.value, b.value
    return _make(av * bv, (a, b),
                 lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def neg(a) -> Node:
    a = constant(a)
    return _make(-a.value, (a,), lambda g: (-g,))


def matmul(a, b) -> Node:
    a, b = constant(a), constant(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.value, b.value
    return _make(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def sigmoid(a) -> Node:
    a = constant(a)
    s = expit(a.value)
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a) -> Node:
    a = constant(a)
    t = np.tanh(a.value)
    return _make(t, (a,), lambda g: (g * (1.0 - t * t),))


def relu(a) -> Node:
    a = constant(a)
    mask = a.value > 0
    return _make(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def exp(a) -> Node:
    a = constant(a)
    e = np.exp(a.value)
    return _make(e, (a,), lambda g: (g * e,))


def log(a) -> Node:
    a = constant(a)
    v = a.value
    return _make(np.log(v), (a,), lambda g: (g / v,))


def clamp_min(a, lo: float) -> Node:
    """max(a, lo); gradient is zero where the floor is active."""
    a = constant(a)
    mask = a.value >= lo
    return _make(np.where(mask, a.value, lo), (a,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# row-wise normalisation

def softmax_rows(a) -> Node:
    a = constant(a)
    z = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward_fn(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return _make(p, (a,), backward_fn)


def log_softmax_rows(a) -> Node:
    a = constant(a)
    z = a.value - a.value.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    p = np.exp(out)
    return _make(out, (a,), lambda g: (g - p * g.sum(axis=-1, keepdims=True),))


# ---------------------------------------------------------------------------
# structural

def concat(nodes: Sequence, axis: int = -1) -> Node:
    nodes = [constant(n) for n in nodes]
    if not nodes:
        raise ShapeError("concat: nothing to concatenate")
    try:
        out = np.concatenate([n.value for n in nodes], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {[n.shape for n in nodes]} along axis {axis}: {exc}") from None
    ax = axis % out.ndim
    bounds = np.cumsum([n.shape[ax] for n in nodes])[:-1]

    def backward_fn(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _make(out, nodes, backward_fn)


def take(a, index) -> Node:
    """Basic or advanced indexing; repeated indices accumulate on backward."""
    a = constant(a)
    try:
        out = a.value[index]
    except IndexError as exc:
        raise ShapeError(f"slice: {exc}") from None
    shape = a.shape

    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis
                for i in parts)

    def backward_fn(g):
        full = np.zeros(shape)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _make(out, (a,), backward_fn)


def reshape(a, shape) -> Node:
    a = constant(a)
    old = a.shape
    try:
        out = a.value.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: {exc}") from None
    return _make(out, (a,), lambda g: (g.reshape(old),))


def sum(a, axis=None) -> Node:  # noqa: A001 - mirrors numpy
    a = constant(a)
    shape = a.shape
    out = a.value.sum(axis=axis)

    def backward_fn(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(out, (a,), backward_fn)


def mean(a, axis=None) -> Node:
    a = constant(a)
    count = a.value.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(sum(a, axis), 1.0 / count)


# ---------------------------------------------------------------------------
# backward pass

def _topological(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Node) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every reachable leaf.

    Intermediate gradients live only for the duration of the call, so two
    calls on the same graph add exactly twice the gradient to each leaf.
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    for node in reversed(_topological(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.backward_fn is None:
            if node.requires_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg


# ---------------------------------------------------------------------------
# optimisation

@dataclass
class AdamState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              state: AdamState | None, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    if len(params) != len(grads):
        raise ShapeError(f"adam_step: {len(params)} params but {len(grads)} grads")
    if state is None or not state.m:
        state = AdamState(0, [np.zeros_like(p) for p in params],
                          [np.zeros_like(p) for p in params])
    if len(state.m) != len(params):
        raise ShapeError("adam_step: optimiser state does not match parameter list")
    t = state.step + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"adam_step: param {p.shape} vs grad {g.shape} vs state {m.shape}")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(t, new_m, new_v)


def clip_by_global_norm(grads: Sequence[np.ndarray], max_norm: float) -> list[np.ndarray]:
    total = np.sqrt(np.sum([np.sum(g * g) for g in grads]))
    if total <= max_norm or total == 0.0:
        return list(grads)
    scale = max_norm / total
    return [g * scale for g in grads]
