"""Dense float64 tensors with reverse-mode automatic differentiation.

Everything is eager: an op computes its numpy result immediately and, when a
Tape is active and some input requires grad, records a backward closure on
that tape. Tapes are plain ordered lists, so reverse iteration is already a
valid topological order and backward visits each node exactly once.

Tapes are single-threaded. Parameters (leaf tensors) may be shared read-only
across threads; each thread gets its own active-tape stack.
"""

from __future__ import annotations

import threading

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible; names the op and both shapes."""

    def __init__(self, op, shape_a, shape_b):
        super().__init__(f"{op}: incompatible shapes {tuple(shape_a)} and {tuple(shape_b)}")
        self.op = op
        self.shapes = (tuple(shape_a), tuple(shape_b))


class Tensor:
    """A dense float64 array plus a requires_grad flag. Data is never dtype-cast
    after construction; all math stays in 64-bit."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, np.ndarray):
            self.data = data if data.dtype == np.float64 else data.astype(np.float64)
        else:
            self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def values(self):
        """Flat value list view (row-major)."""
        return self.data.reshape(-1)

    def item(self):
        return float(self.data)

    def copy(self):
        return Tensor(self.data.copy(), self.requires_grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; the real work lives in the module-level ops.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


class Tape:
    """Ordered record of primitive ops. Each node holds (output, inputs,
    backward closure); construction order is the topological order."""

    __slots__ = ("_nodes",)

    def __init__(self):
        self._nodes = []

    def __len__(self):
        return len(self._nodes)

    def record(self, out, inputs, backward_fn):
        self._nodes.append((out, inputs, backward_fn))

    def __enter__(self):
        _STATE.stack.append(self)
        return self

    def __exit__(self, *exc):
        popped = _STATE.stack.pop()
        assert popped is self

    def gradients(self, loss, params=None):
        """Backward pass from a scalar loss.

        Returns a dict mapping each requires-grad leaf tensor reached from the
        loss to its gradient Tensor. Leaves in `params` (an iterable of
        tensors) that the loss never touched get zero gradients.
        """
        if loss.data.size != 1:
            raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
        grads = {id(loss): np.ones_like(loss.data)}
        keep = {id(loss): loss}
        for out, inputs, backward_fn in reversed(self._nodes):
            g = grads.pop(id(out), None)
            keep.pop(id(out), None)
            if g is None:
                continue
            for t, piece in zip(inputs, backward_fn(g)):
                if piece is None or not t.requires_grad:
                    continue
                tid = id(t)
                acc = grads.get(tid)
                if acc is None:
                    # Store as-is; accumulation below is out-of-place, so aliasing
                    # the upstream gradient array is safe.
                    grads[tid] = piece
                    keep[tid] = t
                else:
                    grads[tid] = acc + piece
        result = {}
        for tid, t in keep.items():
            if t.requires_grad:
                result[t] = Tensor(grads[tid])
        if params is not None:
            for p in params:
                if p not in result:
                    result[p] = Tensor(np.zeros_like(p.data))
        return result


class _TapeState(threading.local):
    def __init__(self):
        self.stack = []
        self.disabled = 0


_STATE = _TapeState()


def active_tape():
    if _STATE.disabled or not _STATE.stack:
        return None
    return _STATE.stack[-1]


class no_grad:
    """Context manager that suppresses tape recording (rollout mode)."""

    def __enter__(self):
        _STATE.disabled += 1
        return self

    def __exit__(self, *exc):
        _STATE.disabled -= 1


def _emit(out_data, inputs, backward_fn):
    out = Tensor(out_data)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(out, inputs, backward_fn)
    return out


def _unbroadcast(grad, shape):
    """Sum grad down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------- primitives


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeError("add", a.shape, b.shape) from None

    def backward(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape))

    return _emit(out, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data - b.data
    except ValueError:
        raise ShapeError("sub", a.shape, b.shape) from None

    def backward(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape))

    return _emit(out, (a, b), backward)


def neg(a):
    a = as_tensor(a)
    return _emit(-a.data, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeError("mul", a.shape, b.shape) from None

    def backward(g):
        return (_unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape))

    return _emit(out, (a, b), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.shape[-1] != bd.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    out = ad @ bd

    def backward(g):
        if ad.ndim == 1 and bd.ndim == 2:  # (k,) @ (k,n) -> (n,)
            return (g @ bd.T, np.outer(ad, g))
        if ad.ndim == 2 and bd.ndim == 1:  # (m,k) @ (k,) -> (m,)
            return (np.outer(g, bd), ad.T @ g)
        if ad.ndim == 1 and bd.ndim == 1:  # dot -> scalar
            return (g * bd, g * ad)
        return (g @ bd.T, ad.T @ g)

    return _emit(out, (a, b), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    datas = [t.data for t in tensors]
    try:
        out = np.concatenate(datas, axis=axis)
    except ValueError:
        raise ShapeError("concat", datas[0].shape, datas[-1].shape) from None
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(datas))
        )

    return _emit(out, tuple(tensors), backward)


def slice_(a, start, stop, axis=0):
    a = as_tensor(a)
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = a.data[index]

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _emit(out.copy(), (a,), backward)


def reshape(a, shape):
    a = as_tensor(a)
    out = a.data.reshape(shape)

    def backward(g):
        return (g.reshape(a.data.shape),)

    return _emit(out.copy(), (a,), backward)


def sigmoid(a):
    a = as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        return (g * out * (1.0 - out),)

    return _emit(out, (a,), backward)


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _emit(out, (a,), backward)


def relu(a):
    a = as_tensor(a)
    out = np.maximum(a.data, 0.0)

    def backward(g):
        return (g * (a.data > 0.0),)

    return _emit(out, (a,), backward)


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return _emit(out, (a,), backward)


def log(a):
    a = as_tensor(a)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.log(a.data)

    def backward(g):
        return (g / a.data,)

    return _emit(out, (a,), backward)


def softmax(a, axis=-1):
    a = as_tensor(a)
    if a.data.shape[axis] == 0:
        raise ValueError(f"softmax: empty axis {axis} in shape {a.shape}")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _emit(out, (a,), backward)


def reduce_sum(a, axis=None):
    a = as_tensor(a)
    out = a.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            return (np.full_like(a.data, float(g)),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy(),)

    return _emit(out, (a,), backward)


def reduce_mean(a, axis=None):
    a = as_tensor(a)
    out = a.data.mean(axis=axis)
    denom = a.data.size if axis is None else a.data.shape[axis]

    def backward(g):
        if axis is None:
            return (np.full_like(a.data, float(g) / denom),)
        return (np.broadcast_to(np.expand_dims(g / denom, axis), a.data.shape).copy(),)

    return _emit(out, (a,), backward)


def reduce_max(a, axis=None):
    a = as_tensor(a)
    out = a.data.max(axis=axis)

    def backward(g):
        # Subgradient: route to the first argmax only, keeping backward deterministic.
        full = np.zeros_like(a.data)
        if axis is None:
            full.reshape(-1)[int(a.data.argmax())] = float(g)
        else:
            idx = np.expand_dims(a.data.argmax(axis=axis), axis)
            np.put_along_axis(full, idx, np.expand_dims(g, axis), axis)
        return (full,)

    return _emit(out, (a,), backward)


def segment_aggregate(values, segment_ids, num_segments, reduce="sum"):
    """Per-segment reduction over the leading axis.

    values: (n, ...) tensor; segment_ids: int array of length n with entries in
    [0, num_segments). Empty segments produce zeros for every reduction.
    """
    values = as_tensor(values)
    seg = np.asarray(segment_ids, dtype=np.intp)
    if seg.shape != (values.data.shape[0],):
        raise ShapeError("segment_aggregate", values.shape, seg.shape)
    out_shape = (num_segments,) + values.data.shape[1:]
    if reduce == "sum" or reduce == "mean":
        out = np.zeros(out_shape)
        np.add.at(out, seg, values.data)
        if reduce == "mean":
            counts = np.bincount(seg, minlength=num_segments).astype(np.float64)
            safe = np.maximum(counts, 1.0).reshape((num_segments,) + (1,) * (values.data.ndim - 1))
            out = out / safe

            def backward(g):
                return (g[seg] / safe[seg],)

        else:

            def backward(g):
                return (g[seg],)

    elif reduce == "max":
        out = np.zeros(out_shape)
        filled = np.zeros(num_segments, dtype=bool)
        np.logical_or.at(filled, seg, True)
        neg_inf = np.full(out_shape, -np.inf)
        np.maximum.at(neg_inf, seg, values.data)
        out[filled] = neg_inf[filled]
        winner = neg_inf[seg] == values.data  # may mark ties in several rows

        def backward(g):
            # Ties: keep only the first row per (segment, position), deterministically.
            mask = winner.copy()
            flat = mask.reshape(mask.shape[0], -1)
            seen = np.zeros((num_segments, flat.shape[1]), dtype=bool)
            for i in range(flat.shape[0]):
                row = flat[i] & ~seen[seg[i]]
                seen[seg[i]] |= row
                flat[i] = row
            return (g[seg] * mask,)

    else:
        raise ValueError(f"segment_aggregate: unknown reduction {reduce!r}")
    return _emit(out, (values,), backward)


def transpose(a):
    a = as_tensor(a)
    out = a.data.T.copy()

    def backward(g):
        return (g.T.copy(),)

    return _emit(out, (a,), backward)


def embed_lookup(table, ids):
    """Row gather: table (n, d), ids int array -> (len(ids), d)."""
    table = as_tensor(table)
    idx = np.asarray(ids, dtype=np.intp)
    out = table.data[idx]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        return (full,)

    return _emit(out, (table,), backward)


_PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "concat": lambda *ts, axis=0: concat(ts, axis=axis),
    "slice": slice_,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "softmax": softmax,
    "log": log,
    "reduce_sum": reduce_sum,
    "reduce_mean": reduce_mean,
    "reduce_max": reduce_max,
    "segment_aggregate": segment_aggregate,
    "embed_lookup": embed_lookup,
    "sub": sub,
    "neg": neg,
    "exp": exp,
    "transpose": transpose,
}


def forward_primitive(op, *inputs, **kwargs):
    """Name-based dispatch over the primitive op set."""
    try:
        fn = _PRIMITIVES[op]
    except KeyError:
        raise ValueError(f"unknown primitive {op!r}") from None
    return fn(*inputs, **kwargs)
