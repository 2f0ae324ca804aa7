"""Dense tensors with reverse-mode differentiation.

Each op records its inputs and a backward closure on the output tensor; the
recorded graph is the tape. `backward` topologically sorts it, visits every
record once, and accumulates gradients into requires_grad leaves. Float32 is
the training default; switch to float64 (`use_dtype`) for gradient checking.
Every op validates output finiteness: a NaN/Inf raises immediately.
"""

from __future__ import annotations

import contextlib

import numpy as np
import scipy.sparse as sp

_default_dtype = np.float32


def default_dtype():
    return _default_dtype


def set_default_dtype(dt):
    global _default_dtype
    _default_dtype = np.dtype(dt).type


@contextlib.contextmanager
def use_dtype(dt):
    global _default_dtype
    old = _default_dtype
    _default_dtype = np.dtype(dt).type
    try:
        yield
    finally:
        _default_dtype = old


class NumericError(ArithmeticError):
    """An op produced NaN/Inf, or shapes are incompatible."""


class TapeStateError(RuntimeError):
    """Backward called twice over the same recorded graph."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn", "_done")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or _default_dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._grad_fn = None
        self._done = False

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.requires_grad else 'no'})"

    # light operator sugar; the op functions below are the canonical surface
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return hadamard(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x, dtype=None):
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


def parameter(data, dtype=None):
    return Tensor(data, requires_grad=True, dtype=dtype)


def _out(data, parents, grad_fn, op):
    if not np.isfinite(data).all():
        raise NumericError(f"{op}: non-finite values in output")
    t = Tensor.__new__(Tensor)
    t.data = data
    t.grad = None
    t.requires_grad = any(p.requires_grad for p in parents)
    t._parents = tuple(parents) if t.requires_grad else ()
    t._grad_fn = grad_fn if t.requires_grad else None
    t._done = False
    return t


def _acc(t, g):
    if t.grad is None:
        t.grad = g.astype(t.data.dtype, copy=True)
    else:
        t.grad += g


def backward(loss: Tensor):
    """Reverse sweep from a scalar loss; returns {tensor: gradient}.

    Gradients land on every requires_grad tensor reachable from the loss;
    untracked inputs receive none. Re-running without a fresh forward pass
    raises TapeStateError.
    """
    if loss.data.size != 1:
        raise NumericError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if loss._done:
        raise TapeStateError("backward already ran over this tape; run forward again")

    topo = []
    state = {}  # id -> 0 visiting, 1 done
    stack = [(loss, iter(loss._parents))]
    state[id(loss)] = 0
    while stack:
        node, it = stack[-1]
        advanced = False
        for parent in it:
            if parent.requires_grad and id(parent) not in state:
                state[id(parent)] = 0
                stack.append((parent, iter(parent._parents)))
                advanced = True
                break
        if not advanced:
            stack.pop()
            state[id(node)] = 1
            topo.append(node)

    for node in topo:
        node.grad = None
    loss.grad = np.ones_like(loss.data)
    grads = {}
    for node in reversed(topo):
        if node._grad_fn is not None and node.grad is not None:
            node._grad_fn(node.grad)
        node._done = True
        if node.requires_grad and not node._parents:
            grads[node] = node.grad
    return grads


# --------------------------------------------------------------------- ops

def _match(a, b, op):
    if a.data.shape != b.data.shape:
        raise NumericError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise NumericError(f"matmul: incompatible shapes {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def grad_fn(g):
        if a.requires_grad:
            _acc(a, g @ b.data.T)
        if b.requires_grad:
            _acc(b, a.data.T @ g)

    return _out(out_data, (a, b), grad_fn, "matmul")


def sparse_adj_matmul(adj, x):
    """adj @ x for a constant scipy sparse operator; differentiates through x."""
    x = as_tensor(x)
    if not sp.issparse(adj):
        raise NumericError("sparse_adj_matmul: adj must be a scipy sparse matrix")
    if adj.shape[1] != x.data.shape[0]:
        raise NumericError(f"sparse_adj_matmul: {adj.shape} @ {x.data.shape}")
    out_data = np.asarray(adj @ x.data)
    adj_t = adj.T.tocsr()

    def grad_fn(g):
        if x.requires_grad:
            _acc(x, np.asarray(adj_t @ g))

    return _out(out_data, (x,), grad_fn, "sparse_adj_matmul")


def add(a, b):
    """Elementwise sum; b may be a (d,) bias broadcast over (n, d) rows."""
    a, b = as_tensor(a), as_tensor(b)
    bias = a.data.ndim == 2 and b.data.ndim == 1 and a.data.shape[1] == b.data.shape[0]
    if not bias:
        _match(a, b, "add")
    out_data = a.data + b.data

    def grad_fn(g):
        if a.requires_grad:
            _acc(a, g)
        if b.requires_grad:
            _acc(b, g.sum(axis=0) if bias else g)

    return _out(out_data, (a, b), grad_fn, "add")


def hadamard(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _match(a, b, "hadamard")
    out_data = a.data * b.data

    def grad_fn(g):
        if a.requires_grad:
            _acc(a, g * b.data)
        if b.requires_grad:
            _acc(b, g * a.data)

    return _out(out_data, (a, b), grad_fn, "hadamard")


def scale(a, c):
    """Multiply by a python constant."""
    a = as_tensor(a)
    c = float(c)
    out_data = a.data * np.asarray(c, dtype=a.data.dtype)

    def grad_fn(g):
        if a.requires_grad:
            _acc(a, g * np.asarray(c, dtype=a.data.dtype))

    return _out(out_data, (a,), grad_fn, "scale")


def add_scalar(a, c):
    a = as_tensor(a)
    out_data = a.data + np.asarray(float(c), dtype=a.data.dtype)

    def grad_fn(g):
        if a.requires_grad:
            _acc(a, g)

    return _out(out_data, (a,), grad_fn, "add_scalar")


def scale_rows(x, w):
    """x[i, :] * w[i] for x (n, d) and w (n,)."""
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 2 or w.data.shape != (x.data.shape[0],):
        raise NumericError(f"scale_rows: {x.data.shape} vs {w.data.shape}")
    out_data = x.data * w.data[:, None]

    def grad_fn(g):
        if x.requires_grad:
            _acc(x, g * w.data[:, None])
        if w.requires_grad:
            _acc(w, (g * x.data).sum(axis=1))

    return _out(out_data, (x, w), grad_fn, "scale_rows")


def concat_rows(parts):
    """Concatenate (n, d_i) blocks along the feature axis."""
    parts = [as_tensor(p) for p in parts]
    n = parts[0].data.shape[0]
    if any(p.data.ndim != 2 or p.data.shape[0] != n for p in parts):
        raise NumericError(f"concat_rows: row counts differ: {[p.data.shape for p in parts]}")
    out_data = np.concatenate([p.data for p in parts], axis=1)
    splits = np.cumsum([p.data.shape[1] for p in parts])[:-1]

    def grad_fn(g):
        for p, piece in zip(parts, np.split(g, splits, axis=1)):
            if p.requires_grad:
                _acc(p, piece)

    return _out(out_data, tuple(parts), grad_fn, "concat_rows")


def row_softmax(x):
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise NumericError(f"row_softmax expects 2-d input, got {x.data.shape}")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out_data = e / e.sum(axis=1, keepdims=True)

    def grad_fn(g):
        if x.requires_grad:
            dot = (g * out_data).sum(axis=1, keepdims=True)
            _acc(x, out_data * (g - dot))

    return _out(out_data, (x,), grad_fn, "row_softmax")


def segment_softmax(x, segments, n_segments):
    """Softmax of a flat vector within integer segments."""
    x = as_tensor(x)
    seg = np.asarray(segments, dtype=np.int64)
    if x.data.shape != seg.shape:
        raise NumericError(f"segment_softmax: {x.data.shape} vs segments {seg.shape}")
    mx = np.full(n_segments, -np.inf, dtype=x.data.dtype)
    np.maximum.at(mx, seg, x.data)
    e = np.exp(x.data - mx[seg])
    denom = np.zeros(n_segments, dtype=x.data.dtype)
    np.add.at(denom, seg, e)
    out_data = e / denom[seg]

    def grad_fn(g):
        if x.requires_grad:
            dot = np.zeros(n_segments, dtype=x.data.dtype)
            np.add.at(dot, seg, g * out_data)
            _acc(x, out_data * (g - dot[seg]))

    return _out(out_data, (x,), grad_fn, "segment_softmax")


def segment_sum(x, segments, n_segments):
    """Sum rows (or entries) sharing a segment id."""
    x = as_tensor(x)
    seg = np.asarray(segments, dtype=np.int64)
    if x.data.shape[0] != seg.shape[0]:
        raise NumericError(f"segment_sum: {x.data.shape} vs segments {seg.shape}")
    shape = (n_segments,) + x.data.shape[1:]
    out_data = np.zeros(shape, dtype=x.data.dtype)
    np.add.at(out_data, seg, x.data)

    def grad_fn(g):
        if x.requires_grad:
            _acc(x, g[seg])

    return _out(out_data, (x,), grad_fn, "segment_sum")


def sigmoid(x):
    x = as_tensor(x)
    z = np.clip(x.data, -60.0, 60.0)  # saturated tails; avoids exp overflow
    out_data = 1.0 / (1.0 + np.exp(-z))

    def grad_fn(g):
        if x.requires_grad:
            _acc(x, g * out_data * (1.0 - out_data))

    return _out(out_data, (x,), grad_fn, "sigmoid")


def tanh(x):
    x = as_tensor(x)
    out_data = np.tanh(x.data)

    def grad_fn(g):
        if x.requires_grad:
            _acc(x, g * (1.0 - out_data * out_data))

    return _out(out_data, (x,), grad_fn, "tanh")


def leaky_relu(x, slope=0.2):
    x = as_tensor(x)
    out_data = np.where(x.data > 0, x.data, slope * x.data)

    def grad_fn(g):
        if x.requires_grad:
            _acc(x, g * np.where(x.data > 0, 1.0, slope).astype(x.data.dtype))

    return _out(out_data, (x,), grad_fn, "leaky_relu")


def elu(x, alpha=1.0):
    x = as_tensor(x)
    neg = alpha * np.expm1(np.minimum(x.data, 0.0))
    out_data = np.where(x.data > 0, x.data, neg)

    def grad_fn(g):
        if x.requires_grad:
            _acc(x, g * np.where(x.data > 0, 1.0, neg + alpha).astype(x.data.dtype))

    return _out(out_data, (x,), grad_fn, "elu")


def dropout(x, rate, train_mode, rng):
    """Inverted dropout: identity in eval mode, 1/(1-rate) scaling in train."""
    x = as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise NumericError(f"dropout rate {rate} outside [0, 1)")
    if not train_mode or rate == 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate).astype(x.data.dtype)
    factor = 1.0 / (1.0 - rate)
    out_data = x.data * keep * factor

    def grad_fn(g):
        if x.requires_grad:
            _acc(x, g * keep * factor)

    return _out(out_data, (x,), grad_fn, "dropout")


def gather_rows(x, idx):
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.int64)
    out_data = x.data[idx]

    def grad_fn(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            np.add.at(full, idx, g)
            _acc(x, full)

    return _out(out_data, (x,), grad_fn, "gather_rows")


def take_per_row(x, cols):
    """x[i, cols[i]] as a flat vector."""
    x = as_tensor(x)
    cols = np.asarray(cols, dtype=np.int64)
    rows = np.arange(x.data.shape[0])
    out_data = x.data[rows, cols]

    def grad_fn(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            np.add.at(full, (rows, cols), g)
            _acc(x, full)

    return _out(out_data, (x,), grad_fn, "take_per_row")


def take_column(x, j):
    x = as_tensor(x)
    out_data = x.data[:, j].copy()

    def grad_fn(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[:, j] = g
            _acc(x, full)

    return _out(out_data, (x,), grad_fn, "take_column")


def reshape(x, shape):
    x = as_tensor(x)
    out_data = x.data.reshape(shape)

    def grad_fn(g):
        if x.requires_grad:
            _acc(x, g.reshape(x.data.shape))

    return _out(out_data, (x,), grad_fn, "reshape")


def reduce_sum(x, axis=None):
    x = as_tensor(x)
    out_data = x.data.sum(axis=axis)

    def grad_fn(g):
        if x.requires_grad:
            if axis is None:
                _acc(x, np.full_like(x.data, g))
            else:
                _acc(x, np.broadcast_to(np.expand_dims(g, axis), x.data.shape).copy())

    return _out(np.asarray(out_data), (x,), grad_fn, "reduce_sum")


def reduce_mean(x, axis=None):
    x = as_tensor(x)
    count = x.data.size if axis is None else x.data.shape[axis]
    return scale(reduce_sum(x, axis=axis), 1.0 / count)


def log(x):
    x = as_tensor(x)
    if (x.data <= 0).any():
        raise NumericError("log: non-positive input")
    out_data = np.log(x.data)

    def grad_fn(g):
        if x.requires_grad:
            _acc(x, g / x.data)

    return _out(out_data, (x,), grad_fn, "log")


def clip(x, lo, hi):
    """Clamp values; gradient is identity inside the range, zero outside."""
    x = as_tensor(x)
    out_data = np.clip(x.data, lo, hi)

    def grad_fn(g):
        if x.requires_grad:
            inside = ((x.data >= lo) & (x.data <= hi)).astype(x.data.dtype)
            _acc(x, g * inside)

    return _out(out_data, (x,), grad_fn, "clip")
