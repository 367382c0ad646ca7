"""Small reverse-mode autodiff over dense float64 numpy arrays.

Every backward rule is written with the same primitives as the forward pass,
so a gradient computed with ``create_graph=True`` is itself recorded on the
tape and can be differentiated again. That second derivative is what the
critic's gradient penalty needs.

Usage::

    with Tape() as tape:
        w = tape.watch(np.ones(3))
        y = (w * w).sum()
    (gw,) = tape.grad(y, [w])
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tape", "Tensor", "NonFiniteError", "grad", "as_tensor", "set_finite_check",
    "add", "sub", "mul", "div", "neg", "matmul", "transpose", "reshape",
    "tanh", "sigmoid", "exp", "log", "sqrt", "square", "softmax",
    "sum", "mean", "concat", "stack", "getitem", "scatter", "broadcast_to",
    "take_rows", "scatter_add_rows", "detach", "gradient_penalty",
]

_CHECK_FINITE = True


class NonFiniteError(FloatingPointError):
    pass


def set_finite_check(enabled: bool) -> bool:
    """Toggle the per-primitive NaN/Inf check. Returns the previous setting."""
    global _CHECK_FINITE
    prev = _CHECK_FINITE
    _CHECK_FINITE = bool(enabled)
    return prev


class Tape:
    """Ordered record of primitive applications.

    Tensors produced from at least one tracked input are appended in creation
    order, so the node list is always topologically sorted.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.recording = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.recording = False
        return False

    def release(self):
        """Drop all recorded nodes, breaking tensor/tape reference cycles."""
        for t in self.nodes:
            t.parents = ()
            t.vjp = None
            t.tape = None
        self.nodes = []

    def _record(self, t: "Tensor"):
        t.tape = self
        t.index = len(self.nodes)
        self.nodes.append(t)

    def watch(self, value) -> "Tensor":
        """Register a leaf (parameter or input) on this tape."""
        data = value.data if isinstance(value, Tensor) else value
        t = Tensor(np.asarray(data, dtype=np.float64))
        self._record(t)
        return t

    def grad(self, output, wrt, create_graph=False):
        return grad(self, output, wrt, create_graph=create_graph)


class Tensor:
    __slots__ = ("data", "tape", "index", "parents", "vjp")
    __array_priority__ = 100.0

    def __init__(self, data, parents=(), vjp=None):
        self.data = data
        self.tape: Tape | None = None
        self.index = -1
        self.parents = parents
        self.vjp = vjp

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def tracked(self):
        return self.tape is not None

    def numpy(self):
        return self.data

    def __repr__(self):
        tag = f", tape#{self.index}" if self.tape is not None else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _make(data, parents: tuple, vjp: Callable) -> Tensor:
    if _CHECK_FINITE and not np.isfinite(data).all():
        raise NonFiniteError(f"non-finite value produced (shape {np.shape(data)})")
    out = Tensor(data)
    for p in parents:
        tape = p.tape
        if tape is not None and tape.recording:
            out.parents = parents
            out.vjp = vjp
            tape._record(out)
            break
    return out


def _unbroadcast(g: Tensor, shape) -> Tensor:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    lead = g.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        lead + i for i, s in enumerate(shape) if s == 1 and g.shape[lead + i] != 1
    )
    out = sum(g, axis=axes, keepdims=True) if axes else g
    return reshape(out, tuple(shape))


# ---------------------------------------------------------------- arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b),
                 lambda g, n: (_unbroadcast(g, sa) if n[0] else None,
                               _unbroadcast(g, sb) if n[1] else None))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b),
                 lambda g, n: (_unbroadcast(g, sa) if n[0] else None,
                               _unbroadcast(neg(g), sb) if n[1] else None))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g, n: (_unbroadcast(mul(g, b), a.shape) if n[0] else None,
                               _unbroadcast(mul(g, a), b.shape) if n[1] else None))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def vjp(g, n):
        ga = _unbroadcast(div(g, b), a.shape) if n[0] else None
        gb = _unbroadcast(neg(div(mul(g, a), mul(b, b))), b.shape) if n[1] else None
        return ga, gb

    return _make(a.data / b.data, (a, b), vjp)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g, n: (neg(g),))


def matmul(a, b) -> Tensor:
    """2-d matrix product."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-d operands, got {a.shape} @ {b.shape}")
    return _make(a.data @ b.data, (a, b),
                 lambda g, n: (matmul(g, transpose(b)) if n[0] else None,
                               matmul(transpose(a), g) if n[1] else None))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ValueError("transpose expects a 2-d tensor")
    return _make(a.data.T, (a,), lambda g, n: (transpose(g),))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g, n: (reshape(g, old),))


# ---------------------------------------------------------------- elementwise

def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = None

    def vjp(g, n):
        return (mul(g, sub(1.0, mul(y, y))),)

    y = _make(np.tanh(a.data), (a,), vjp)
    return y


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    data = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    y = None

    def vjp(g, n):
        return (mul(g, mul(y, sub(1.0, y))),)

    y = _make(data, (a,), vjp)
    return y


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = None

    def vjp(g, n):
        return (mul(g, y),)

    y = _make(np.exp(a.data), (a,), vjp)
    return y


def log(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(a.data)
    return _make(data, (a,), lambda g, n: (div(g, a),))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    y = None

    def vjp(g, n):
        return (div(g, mul(2.0, y)),)

    with np.errstate(invalid="ignore"):
        y = _make(np.sqrt(a.data), (a,), vjp)
    return y


def square(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g, n: (mul(g, mul(2.0, a)),))


def softmax(a, axis=-1) -> Tensor:
    """Softmax along ``axis``; backward uses mul/sub/sum only."""
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = None

    def vjp(g, n):
        inner = sum(mul(g, y), axis=axis, keepdims=True)
        return (mul(y, sub(g, inner)),)

    y = _make(e / e.sum(axis=axis, keepdims=True), (a,), vjp)
    return y


# ---------------------------------------------------------------- reductions

def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def sum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    axes = _norm_axes(axis, a.ndim)
    kept = tuple(1 if i in axes else s for i, s in enumerate(shape))

    def vjp(g, n):
        if not keepdims:
            g = reshape(g, kept)
        return (broadcast_to(g, shape),)

    return _make(np.sum(a.data, axis=axes, keepdims=keepdims), (a,), vjp)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    return _make(np.broadcast_to(a.data, shape).copy(), (a,),
                 lambda g, n: (_unbroadcast(g, src),))


# ---------------------------------------------------------------- structure

def getitem(a, idx) -> Tensor:
    """Basic (slice/int) indexing. Fancy indexing is not supported."""
    a = as_tensor(a)
    shape = a.shape
    return _make(a.data[idx], (a,), lambda g, n: (scatter(g, idx, shape),))


def scatter(a, idx, shape) -> Tensor:
    """Zeros of ``shape`` with ``a`` written at ``idx``; adjoint of getitem."""
    a = as_tensor(a)
    out = np.zeros(shape)
    out[idx] = a.data
    return _make(out, (a,), lambda g, n: (getitem(g, idx),))


def concat(tensors: Sequence, axis=0) -> Tensor:
    ts = tuple(as_tensor(t) for t in tensors)
    nd = ts[0].ndim
    axis = axis % nd
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def vjp(g, n):
        out = []
        for lo, hi, keep in zip(bounds[:-1], bounds[1:], n):
            idx = (slice(None),) * axis + (slice(int(lo), int(hi)),)
            out.append(getitem(g, idx) if keep else None)
        return tuple(out)

    return _make(np.concatenate([t.data for t in ts], axis=axis), ts, vjp)


def stack(tensors: Sequence, axis=0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    shape = ts[0].shape
    axis = axis % (len(shape) + 1)
    new = shape[:axis] + (1,) + shape[axis:]
    return concat([reshape(t, new) for t in ts], axis=axis)


def take_rows(a, rows) -> Tensor:
    """``a[rows]`` for an integer index array; an embedding lookup."""
    a = as_tensor(a)
    rows = np.asarray(rows, dtype=np.int64)
    n_rows = a.shape[0]
    return _make(a.data[rows], (a,), lambda g, n: (scatter_add_rows(g, rows, n_rows),))


def scatter_add_rows(a, rows, n_rows) -> Tensor:
    """Sum rows of ``a`` into ``n_rows`` buckets; adjoint of take_rows."""
    a = as_tensor(a)
    out = np.zeros((n_rows,) + a.shape[1:])
    np.add.at(out, rows, a.data)
    return _make(out, (a,), lambda g, n: (take_rows(g, rows),))


def detach(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data)


# ---------------------------------------------------------------- backward

def grad(tape: Tape, output: Tensor, wrt: Iterable[Tensor], create_graph=False):
    """Gradients of scalar ``output`` with respect to each tensor in ``wrt``.

    With ``create_graph=True`` the returned tensors are themselves recorded on
    ``tape`` and may be passed through further primitives and differentiated.
    """
    wrt = list(wrt)
    if output.tape is not tape:
        raise ValueError("output is not recorded on this tape")
    if output.data.size != 1:
        raise ValueError(f"output must be scalar, got shape {output.shape}")
    for w in wrt:
        if w.tape is not tape:
            raise ValueError("gradient requested for a tensor that is not on the tape")

    nodes = tape.nodes
    last = output.index
    # only propagate along paths that reach a requested tensor
    needed = bytearray(last + 1)
    targets = {w.index for w in wrt}
    for i in range(last + 1):
        if i in targets:
            needed[i] = 1
            continue
        for p in nodes[i].parents:
            if p.tape is tape and needed[p.index]:
                needed[i] = 1
                break

    prev = tape.recording
    tape.recording = bool(create_graph)
    try:
        grads: dict[int, Tensor] = {last: Tensor(np.ones_like(output.data))}
        for i in range(last, -1, -1):
            if not needed[i]:
                continue
            g = grads.get(i)
            node = nodes[i]
            if g is None or node.vjp is None:
                continue
            if i not in targets:
                del grads[i]
            need = tuple(q.tape is tape and bool(needed[q.index]) for q in node.parents)
            pgs = node.vjp(g, need)
            for p, pg in zip(node.parents, pgs):
                if pg is None or p.tape is not tape or not needed[p.index]:
                    continue
                j = p.index
                acc = grads.get(j)
                grads[j] = pg if acc is None else add(acc, pg)
    finally:
        tape.recording = prev

    out = []
    for w in wrt:
        g = grads.get(w.index)
        out.append(g if g is not None else Tensor(np.zeros_like(w.data)))
    return out


def gradient_penalty(tape: Tape, scores: Tensor, inputs, eps=1e-12) -> Tensor:
    """Mean over samples of ``(||d score_i / d input_i||_2 - 1)^2``.

    ``scores`` holds one critic output per sample (or a single scalar) and
    ``inputs`` is a tensor or list of tensors whose leading axis indexes the
    sample. The input-gradient is built with ``create_graph=True`` so the
    result is differentiable with respect to the critic's parameters. ``eps``
    keeps the norm differentiable when the gradient vanishes.
    """
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    total = scores if scores.data.size == 1 else sum(scores)
    if total.shape != ():
        total = reshape(total, ())
    grads = grad(tape, total, inputs, create_graph=True)
    sq = None
    for g in grads:
        axes = tuple(range(1, g.ndim))
        part = sum(square(g), axis=axes) if axes else square(g)
        sq = part if sq is None else add(sq, part)
    if scores.data.size == 1 and sq.data.size > 1 and inputs[0].ndim == sq.ndim:
        sq = sum(sq)
    norm = sqrt(add(sq, eps))
    return mean(square(sub(norm, 1.0)))
