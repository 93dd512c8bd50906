"""Dense tensors with reverse-mode gradients recorded on an explicit tape.

Every differentiable operation appends one entry to the active tape;
``backward`` replays the tape once, in reverse execution order, and
accumulates gradients additively into every tensor that requires them.
Arrays are numpy; float64 is used by tests, float32 by training.
"""
from __future__ import annotations

import numpy as np

from .errors import ContractError, NumericError, ShapeError

# Flip on in tests to assert every op output is finite.
CHECK_FINITE = False

# Large finite stand-in for -inf when masking softmax scores; exp() of it
# underflows to exactly 0.0 in both float32 and float64.
NEG_MASK = -1e30


class Tape:
    """Ordered record of executed differentiable ops.

    Used as a context manager; ops executed inside the block are recorded
    when any of their inputs requires a gradient. A tape is confined to a
    single thread of execution.
    """

    def __init__(self):
        self._entries = []  # (output, inputs, vjp)

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False

    def __len__(self):
        return len(self._entries)


_TAPES: list[Tape] = []


def active_tape():
    return _TAPES[-1] if _TAPES else None


class Tensor:
    """A dense float array plus an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "tape")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={'set' if self.grad is not None else 'none'})"

    # Operator sugar; scalars are wrapped as constant tensors.
    def __add__(self, other):
        return add(self, _wrap(other, self.dtype))

    def __radd__(self, other):
        return add(_wrap(other, self.dtype), self)

    def __sub__(self, other):
        return add(self, neg(_wrap(other, self.dtype)))

    def __rsub__(self, other):
        return add(_wrap(other, self.dtype), neg(self))

    def __mul__(self, other):
        return mul(self, _wrap(other, self.dtype))

    def __rmul__(self, other):
        return mul(_wrap(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _record(out_data, inputs, vjp):
    """Build the output tensor and register the op on the active tape."""
    out = Tensor(out_data)
    if CHECK_FINITE and not np.all(np.isfinite(out.data)):
        raise NumericError("non-finite values in op output")
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.tape = tape
        tape._entries.append((out, inputs, vjp))
    return out


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tensor reachable from a scalar loss.

    Gradients accumulate additively across multiple uses of a tensor.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    tape = loss.tape
    if tape is None:
        raise ContractError("loss was not produced on an active tape")
    loss.grad = np.ones_like(loss.data)
    for out, inputs, vjp in reversed(tape._entries):
        if out.grad is None:
            continue
        grads = vjp(out.grad)
        for t, g in zip(inputs, grads):
            if g is None or not t.requires_grad:
                continue
            if t.grad is None:
                t.grad = g
            else:
                t.grad = t.grad + g


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to the original operand shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise ops


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast")

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record(out, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast")

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record(out, (a, b), vjp)


def neg(a: Tensor) -> Tensor:
    return _record(-a.data, (a,), lambda g: (-g,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def vjp(g, out=out):
        return (g * (1.0 - out * out),)

    return _record(out, (a,), vjp)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def vjp(g, out=out):
        return (g * out * (1.0 - out),)

    return _record(out, (a,), vjp)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; supports (m,k)@(k,n), (B,m,k)@(B,k,n) and (B,m,k)@(k,n)."""
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2 or ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul: {ad.shape} @ {bd.shape}")
    if ad.ndim == 3 and bd.ndim == 3 and ad.shape[0] != bd.shape[0]:
        raise ShapeError(f"matmul: batch sizes differ, {ad.shape} @ {bd.shape}")
    out = np.matmul(ad, bd)

    def vjp(g):
        if ad.ndim == 2 and bd.ndim == 2:
            return g @ bd.T, ad.T @ g
        if ad.ndim == 3 and bd.ndim == 3:
            return g @ bd.transpose(0, 2, 1), ad.transpose(0, 2, 1) @ g
        if ad.ndim == 3 and bd.ndim == 2:
            ga = g @ bd.T
            gb = np.tensordot(ad, g, axes=([0, 1], [0, 1]))
            return ga, gb
        raise ShapeError(f"matmul backward: {ad.shape} @ {bd.shape}")

    return _record(out, (a, b), vjp)


def concat(tensors, axis: int) -> Tensor:
    datas = [t.data for t in tensors]
    base = list(datas[0].shape)
    for d in datas[1:]:
        other = list(d.shape)
        if len(other) != len(base) or any(
            o != b for i, (o, b) in enumerate(zip(other, base)) if i != axis % len(base)
        ):
            raise ShapeError(f"concat: incompatible shapes {[d.shape for d in datas]} on axis {axis}")
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]

    def vjp(g):
        splits = np.split(g, np.cumsum(sizes)[:-1], axis=axis)
        return tuple(splits)

    return _record(out, tuple(tensors), vjp)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def vjp(g):
        return (g.reshape(a.data.shape),)

    return _record(out, (a,), vjp)


def sum_(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _record(out, (a,), vjp)


def mean_(a: Tensor, axis=None) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis=axis), Tensor(np.asarray(1.0 / n, dtype=a.dtype)))


# ---------------------------------------------------------------------------
# softmax family


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax along ``axis`` (max-subtraction before exponentiation)."""
    x = a.data
    if np.isnan(x).any():
        raise NumericError("softmax input contains NaN")
    m = x.max(axis=axis, keepdims=True)
    e = np.exp(x - m)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g, out=out):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _record(out, (a,), vjp)


def cross_entropy(logits: Tensor, target_ids: np.ndarray) -> Tensor:
    """Per-row categorical cross-entropy of (B,V) logits against id targets.

    Returns a (B,) tensor of -log softmax(logits)[target]; the backward pass
    is the usual softmax-minus-one-hot form.
    """
    x = logits.data
    ids = np.asarray(target_ids)
    if x.ndim != 2 or ids.shape != (x.shape[0],):
        raise ShapeError(f"cross_entropy: logits {x.shape} vs targets {ids.shape}")
    m = x.max(axis=1, keepdims=True)
    z = x - m
    lse = np.log(np.exp(z).sum(axis=1)) + m[:, 0]
    rows = np.arange(x.shape[0])
    out = lse - x[rows, ids]

    def vjp(g):
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        p[rows, ids] -= 1.0
        return (g[:, None] * p,)

    return _record(out, (logits,), vjp)


# ---------------------------------------------------------------------------
# indexing


def take_rows(a: Tensor, ids) -> Tensor:
    """Gather rows along axis 0 (embedding lookup / per-emotion selection)."""
    ids = np.asarray(ids)
    out = a.data[ids]

    def vjp(g):
        z = np.zeros_like(a.data)
        np.add.at(z, ids, g)
        return (z,)

    return _record(out, (a,), vjp)


def take_along_time(a: Tensor, idx: np.ndarray) -> Tensor:
    """Reorder the time axis of a (B,T,D) tensor per row: out[b,t]=a[b,idx[b,t]]."""
    idx = np.asarray(idx)
    out = np.take_along_axis(a.data, idx[:, :, None], axis=1)

    def vjp(g):
        z = np.zeros_like(a.data)
        bi = np.broadcast_to(np.arange(idx.shape[0])[:, None], idx.shape)
        np.add.at(z, (bi, idx), g)
        return (z,)

    return _record(out, (a,), vjp)


# ---------------------------------------------------------------------------
# stochastic ops


def dropout(a: Tensor, p: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout: kept activations are scaled by 1/(1-p) at train time,
    so inference is the identity."""
    if not training or p <= 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout probability {p} outside [0, 1)")
    keep = (rng.random(a.data.shape) >= p).astype(a.dtype)
    scale = np.asarray(1.0 / (1.0 - p), dtype=a.dtype)
    factor = keep * scale
    out = a.data * factor

    def vjp(g):
        return (g * factor,)

    return _record(out, (a,), vjp)


# ---------------------------------------------------------------------------
# helpers


def stack_steps(tensors) -> Tensor:
    """Stack a list of (B,D) tensors into (B,T,D) along a new time axis."""
    cols = [reshape(t, (t.shape[0], 1, t.shape[1])) for t in tensors]
    if len(cols) == 1:
        return cols[0]
    return concat(cols, axis=1)


def zeros(shape, dtype=np.float64, requires_grad=False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def uniform_param(rng: np.random.Generator, shape, limit: float, dtype) -> Tensor:
    """Trainable tensor initialized uniform(-limit, limit)."""
    return Tensor(rng.uniform(-limit, limit, size=shape).astype(dtype), requires_grad=True)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
