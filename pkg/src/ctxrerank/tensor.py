"""Dense float64 arrays with reverse-mode gradients.

A :class:`Tensor` wraps a numpy array and records the operation that produced
it. Calling :meth:`Tensor.backward` on a scalar walks the recorded graph in
reverse topological order and accumulates ``.grad`` on every tensor that
requires it.

Items are stored one per row. Weight matrices keep the column-per-item
orientation of the usual ``W x + b`` notation (shape ``out x in``), so a layer
is evaluated as ``x @ W.T + b``. Every op accepts an optional leading batch
axis; weights broadcast across it and their gradients are summed back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

DTYPE = np.float64


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self):
        return transpose(self)

    def numpy(self):
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar tensor")
            grad = np.ones_like(self.data)
        order = _topological_order(self)
        grads = {id(self): np.asarray(grad, dtype=DTYPE)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad and not node._parents:
                node.grad = g.copy() if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not _needs_grad(parent):
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


def _needs_grad(t):
    return t.requires_grad or t._backward is not None


def _topological_order(root):
    order, seen = [], set()
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
        for p in node._parents:
            if id(p) not in seen and _needs_grad(p):
                stack.append((p, False))
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data):
    """A leaf tensor that collects gradients."""
    return Tensor(np.array(data, dtype=DTYPE), requires_grad=True)


def _make(data, parents, backward):
    if any(_needs_grad(p) for p in parents):
        return Tensor(data, _parents=tuple(parents), _backward=backward)
    return Tensor(data)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return _make(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data
    return _make(out, (a, b), lambda g: (_unbroadcast(g * b.data, a.shape),
                                         _unbroadcast(g * a.data, b.shape)))


def relu(a):
    keep = a.data > 0
    return _make(np.where(keep, a.data, 0.0), (a,), lambda g: (g * keep,))


def sigmoid(a):
    """Elementwise logistic function, evaluated without overflow for large |x|."""
    a = as_tensor(a)
    x = a.data
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def log(a):
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def clip(a, lo, hi):
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


def dropout(a, rate, rng=None, training=False):
    """Inverted dropout: zero with probability ``rate``, rescale survivors."""
    if not training or rate <= 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _make(a.data * keep, (a,), lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# shape manipulation

def transpose(a):
    """Swap the last two axes."""
    return _make(np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def moveaxis(a, source, destination):
    return _make(np.moveaxis(a.data, source, destination), (a,),
                 lambda g: (np.moveaxis(g, destination, source),))


def reshape(a, shape):
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def broadcast_to(a, shape):
    a = as_tensor(a)
    return _make(np.broadcast_to(a.data, shape).copy(), (a,),
                 lambda g: (_unbroadcast(g, a.shape),))


def _is_basic_index(index):
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (slice, int, type(Ellipsis))) or p is None for p in parts)


def getitem(a, index):
    basic = _is_basic_index(index)

    def backward(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)
    return _make(a.data[index], (a,), backward)


def concat(tensors: Sequence[Tensor], axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)

    def backward(g):
        bounds = np.cumsum(sizes)[:-1]
        return tuple(np.split(g, bounds, axis=axis))
    return _make(out, tensors, backward)


def take_rows(table, index, padding_index=0):
    """Gather rows of a 2-D ``table``; rows at ``padding_index`` get no gradient."""
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(table.data)
        flat_idx = index.reshape(-1)
        flat_g = g.reshape(-1, table.shape[1])
        if padding_index is not None:
            live = flat_idx != padding_index
            flat_idx, flat_g = flat_idx[live], flat_g[live]
        np.add.at(full, flat_idx, flat_g)
        return (full,)
    return _make(table.data[index], (table,), backward)


# ---------------------------------------------------------------------------
# reductions and products

def sum_(a, axis=None):
    shape = a.shape
    out = a.data.sum(axis=axis)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)
    return _make(out, (a,), backward)


def matmul(a, b):
    """Matrix product over the last two axes, broadcasting any leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    if b.ndim == 2 and a.ndim > 2:
        # one GEMM over the flattened leading axes
        lead = a.shape[:-1]
        a2 = a.data.reshape(-1, a.shape[-1])
        out = (a2 @ b.data).reshape(lead + (b.shape[-1],))

        def backward_flat(g):
            g2 = g.reshape(-1, g.shape[-1])
            return (g2 @ b.data.T).reshape(a.shape), a2.T @ g2
        return _make(out, (a, b), backward_flat)

    out = a.data @ b.data

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return _make(out, (a, b), backward)


def softmax(a, mask=None):
    """Softmax along the last axis.

    ``mask`` (broadcastable to ``a``) marks admissible entries. Masked entries
    get weight exactly zero; a row with no admissible entry comes out all zero.
    """
    x = a.data
    if mask is None:
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        out = e / e.sum(axis=-1, keepdims=True)
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        row_max = np.where(mask, x, -np.inf).max(axis=-1, keepdims=True)
        row_max = np.where(np.isfinite(row_max), row_max, 0.0)
        e = np.where(mask, np.exp(np.where(mask, x - row_max, 0.0)), 0.0)
        total = e.sum(axis=-1, keepdims=True)
        out = e / np.where(total > 0, total, 1.0)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)
    return _make(out, (a,), backward)


def softmax_rows(a):
    """Row-wise softmax of a 2-D matrix, stabilised by the row maximum."""
    a = as_tensor(a)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"softmax_rows needs a non-empty 2-D matrix, got shape {a.shape}")
    return softmax(a)


def linear(x, w, b=None, activation=None):
    """Affine map ``x @ w.T + b`` with an optional ReLU.

    ``w`` has shape (out, in) and ``x`` holds one example per row, so the
    column-per-example form ``w @ x.T`` is the transpose of the result.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.shape[-1] != w.shape[-1]:
        raise ValueError(f"linear shape mismatch: input {x.shape}, weight {w.shape}")
    out = matmul(x, transpose(w))
    if b is not None:
        b = as_tensor(b)
        if b.shape[-1] != w.shape[0]:
            raise ValueError(f"bias of length {b.shape[-1]} does not fit weight {w.shape}")
        out = out + b
    if activation == "relu":
        out = relu(out)
    elif activation not in (None, "none"):
        raise ValueError(f"unknown activation {activation!r}")
    return out


def binary_cross_entropy(p, y, eps=1e-12):
    """Elementwise ``-(y log p + (1-y) log(1-p))`` with p clamped to [eps, 1-eps]."""
    y = np.asarray(y, dtype=DTYPE)
    pc = clip(p, eps, 1.0 - eps)
    return neg(add(mul(log(pc), y), mul(log(1.0 - pc), 1.0 - y)))


# ---------------------------------------------------------------------------
# finite-difference checking

@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    worst_coordinate: tuple
    passed: bool


def grad_check(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor] | Iterable[Tensor],
               epsilon=1e-6, tolerance=1e-6) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    ``loss_fn`` takes no arguments and reads the current values of ``params``
    (which are perturbed in place and restored). The relative error of a
    coordinate is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not isinstance(params, Mapping):
        params = {str(i): p for i, p in enumerate(params)}
    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    if not np.all(np.isfinite(loss.data)):
        raise ValueError("loss is not finite")
    loss.backward()
    analytic = {k: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for k, p in params.items()}

    worst, worst_at = 0.0, (None, None)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = float(loss_fn().data)
            flat[i] = orig - epsilon
            down = float(loss_fn().data)
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise ValueError(f"loss is not finite when perturbing {name}[{i}]")
            numeric = (up - down) / (2.0 * epsilon)
            a = analytic[name].reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if err > worst or worst_at[0] is None:
                worst = max(worst, err)
                worst_at = (name, np.unravel_index(i, p.shape))
    return GradCheckReport(float(worst), worst_at, bool(worst <= tolerance))
