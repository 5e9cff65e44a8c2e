"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every primitive below records one node holding its parents and a backward
closure. ``backward`` walks the recorded graph in reverse topological order
and accumulates gradients into every tensor that requires them.

Broadcasting is deliberately limited to adding a bias vector over the rows
of a matrix (``add_bias``); every other binary op needs equal shapes.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np

from genma import kernels

__all__ = [
    "Tensor", "ShapeError", "GradCheckReport",
    "tensor", "parameter", "no_grad", "backward", "grad_check",
    "matmul", "transpose", "add", "sub", "hadamard", "scale",
    "sigmoid", "tanh", "relu", "log", "clip_min", "elementwise",
    "add_bias", "softmax_rows", "masked_softmax_rows",
    "sum_all", "mean_all", "reshape", "concat", "slice_last",
    "select_step", "stack_steps", "take_rows", "pick", "conv1d", "maxpool1d",
    "inject_fault", "clear_faults",
]

DTYPE = np.float64

_grad_enabled = True
# names of primitives whose backward rule is deliberately corrupted
_faults: set[str] = set()


class ShapeError(ValueError):
    pass


class _Node:
    __slots__ = ("op", "parents", "backward")

    def __init__(self, op, parents, backward):
        self.op = op
        self.parents = parents
        self.backward = backward


class Tensor:
    """A float64 array plus an optional gradient buffer and tape link."""

    __slots__ = ("data", "grad", "requires_grad", "node", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=DTYPE, order="C")
        self.requires_grad = requires_grad
        self.grad = None
        self.node = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE, copy=True).reshape(self.data.shape)
        else:
            self.grad += g

    def backward(self):
        backward(self)

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return hadamard(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def tensor(data, requires_grad=False, name=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def parameter(data, name=None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


@contextlib.contextmanager
def no_grad():
    """Run forward computations without recording tape nodes."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def inject_fault(op: str):
    """Corrupt the backward rule of ``op`` (negative control for grad checks)."""
    _faults.add(op)


def clear_faults():
    _faults.clear()


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out_data, parents, op, backward_fn) -> Tensor:
    needs = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=needs)
    if needs:
        out.node = _Node(op, parents, backward_fn)
    return out


def _check_same(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# --------------------------------------------------------------------------
# linear algebra
# --------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """Matrix product of 2-D tensors, or of 3-D tensors with equal batch size."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim == 2 and b.ndim == 2:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    elif a.ndim == 3 and b.ndim == 3:
        if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
            raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    else:
        raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g @ np.swapaxes(bd, -1, -2))
        if b.requires_grad:
            b._accumulate(np.swapaxes(ad, -1, -2) @ g)

    return _record(ad @ bd, (a, b), "matmul", bwd)


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose: expected 2-D tensor, got {a.shape}")

    def bwd(g):
        a._accumulate(g.T)

    return _record(a.data.T, (a,), "transpose", bwd)


# --------------------------------------------------------------------------
# elementwise
# --------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same("add", a, b)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _record(a.data + b.data, (a, b), "add", bwd)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same("sub", a, b)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return _record(a.data - b.data, (a, b), "sub", bwd)


def hadamard(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same("hadamard", a, b)
    ad, bd = a.data, b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * bd)
        if b.requires_grad:
            b._accumulate(g * ad)

    return _record(ad * bd, (a, b), "hadamard", bwd)


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)

    def bwd(g):
        a._accumulate(g * c)

    return _record(a.data * c, (a,), "scale", bwd)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    # split by sign so exp never overflows
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)

    def bwd(g):
        if "sigmoid" in _faults:
            a._accumulate(g * s)
        else:
            a._accumulate(g * s * (1.0 - s))

    return _record(s, (a,), "sigmoid", bwd)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    t = np.tanh(a.data)

    def bwd(g):
        if "tanh" in _faults:
            a._accumulate(g * (1.0 - t))
        else:
            a._accumulate(g * (1.0 - t * t))

    return _record(t, (a,), "tanh", bwd)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    keep = a.data > 0

    def bwd(g):
        a._accumulate(g * keep)

    return _record(np.where(keep, a.data, 0.0), (a,), "relu", bwd)


def log(a) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0):
        raise ValueError("log: non-positive input")
    x = a.data

    def bwd(g):
        a._accumulate(g / x)

    return _record(np.log(x), (a,), "log", bwd)


def clip_min(a, floor: float) -> Tensor:
    """max(a, floor); gradient passes only where a > floor."""
    a = _as_tensor(a)
    keep = a.data > floor

    def bwd(g):
        a._accumulate(g * keep)

    return _record(np.where(keep, a.data, floor), (a,), "clip_min", bwd)


def add_bias(x, b) -> Tensor:
    """Add a bias vector to every row: x[..., j] + b[j]."""
    x, b = _as_tensor(x), _as_tensor(b)
    if b.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise ShapeError(f"add_bias: shape mismatch {x.shape} vs {b.shape}")

    def bwd(g):
        if x.requires_grad:
            x._accumulate(g)
        if b.requires_grad:
            b._accumulate(g.reshape(-1, b.shape[0]).sum(axis=0))

    return _record(x.data + b.data, (x, b), "add_bias", bwd)


_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}
_BINARY = {"add": add, "sub": sub, "hadamard": hadamard}


def elementwise(op: str, *args) -> Tensor:
    """Dispatch a pointwise op by name.

    ``add`` with a 1-D second argument whose length matches the last axis of
    the first is treated as bias-over-rows; nothing else broadcasts.
    """
    if op in _UNARY:
        if len(args) != 1:
            raise TypeError(f"{op} takes one argument")
        return _UNARY[op](args[0])
    if op in _BINARY:
        if len(args) != 2:
            raise TypeError(f"{op} takes two arguments")
        a, b = (_as_tensor(t) for t in args)
        if op == "add" and b.ndim == 1 and a.ndim > 1:
            return add_bias(a, b)
        return _BINARY[op](a, b)
    raise ValueError(f"unknown elementwise op {op!r}")


# --------------------------------------------------------------------------
# softmax
# --------------------------------------------------------------------------

def _softmax_bwd(a, p, op):
    def bwd(g):
        if op in _faults:
            a._accumulate(g * p)
            return
        dot = np.sum(g * p, axis=-1, keepdims=True)
        a._accumulate(p * (g - dot))
    return bwd


def softmax_rows(x) -> Tensor:
    """Row-wise softmax of a 2-D tensor with max subtraction."""
    x = _as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"softmax_rows: expected 2-D tensor, got {x.shape}")
    if np.isnan(x.data).any():
        raise ValueError("softmax_rows: NaN input")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    return _record(p, (x,), "softmax_rows", _softmax_bwd(x, p, "softmax_rows"))


def masked_softmax_rows(x, mask) -> Tensor:
    """Row-wise softmax where positions with ``mask`` False get exactly zero."""
    x = _as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    if x.ndim != 2 or mask.shape != x.shape:
        raise ShapeError(f"masked_softmax_rows: shape mismatch {x.shape} vs {mask.shape}")
    if not mask.any(axis=1).all():
        raise ValueError("masked_softmax_rows: a row has every position masked")
    if np.isnan(x.data).any():
        raise ValueError("masked_softmax_rows: NaN input")
    z = np.where(mask, x.data, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    p = e / e.sum(axis=1, keepdims=True)
    return _record(p, (x,), "masked_softmax_rows",
                   _softmax_bwd(x, p, "masked_softmax_rows"))


# --------------------------------------------------------------------------
# reductions and shape plumbing
# --------------------------------------------------------------------------

def sum_all(a) -> Tensor:
    a = _as_tensor(a)

    def bwd(g):
        a._accumulate(np.full(a.shape, float(g)))

    return _record(np.sum(a.data), (a,), "sum", bwd)


def mean_all(a) -> Tensor:
    a = _as_tensor(a)
    n = a.data.size

    def bwd(g):
        a._accumulate(np.full(a.shape, float(g) / n))

    return _record(np.sum(a.data) / n, (a,), "mean", bwd)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.shape

    def bwd(g):
        a._accumulate(g.reshape(old))

    return _record(a.data.reshape(shape), (a,), "reshape", bwd)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {[t.shape for t in tensors]}: {exc}") from None
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bwd(g):
        for t, piece in zip(tensors, np.split(g, sizes, axis=axis)):
            if t.requires_grad:
                t._accumulate(piece)

    return _record(out, tuple(tensors), "concat", bwd)


def slice_last(a, start: int, stop: int) -> Tensor:
    """a[..., start:stop]."""
    a = _as_tensor(a)

    def bwd(g):
        full = np.zeros(a.shape)
        full[..., start:stop] = g
        a._accumulate(full)

    return _record(a.data[..., start:stop], (a,), "slice_last", bwd)


def select_step(a, t: int) -> Tensor:
    """a[:, t, :] from a (B, T, D) tensor."""
    a = _as_tensor(a)
    if a.ndim != 3:
        raise ShapeError(f"select_step: expected 3-D tensor, got {a.shape}")

    def bwd(g):
        if a.grad is None:
            a.grad = np.zeros(a.shape)
        a.grad[:, t, :] += g

    return _record(a.data[:, t, :], (a,), "select_step", bwd)


def stack_steps(steps) -> Tensor:
    """Stack T tensors of shape (B, D) into (B, T, D)."""
    steps = [_as_tensor(s) for s in steps]
    out = np.stack([s.data for s in steps], axis=1)

    def bwd(g):
        for i, s in enumerate(steps):
            if s.requires_grad:
                s._accumulate(g[:, i, :])

    return _record(out, tuple(steps), "stack", bwd)


def take_rows(table, ids) -> Tensor:
    """Gather rows of a 2-D table; rows for index 0 (padding) come out zero."""
    table = _as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    n = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise IndexError(f"take_rows: index out of range for table of {n} rows")
    keep = (ids != 0)[..., None]
    out = table.data[ids] * keep

    def bwd(g):
        full = np.zeros(table.shape)
        np.add.at(full, ids.reshape(-1), (g * keep).reshape(-1, table.shape[1]))
        table._accumulate(full)

    return _record(out, (table,), "take_rows", bwd)


def pick(a, idx) -> Tensor:
    """a[i, idx[i]] for each row i of a 2-D tensor."""
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(a.shape[0])

    def bwd(g):
        full = np.zeros(a.shape)
        full[rows, idx] = g
        a._accumulate(full)

    return _record(a.data[rows, idx], (a,), "pick", bwd)


# --------------------------------------------------------------------------
# sequence kernels (delegated to the compiled core when available)
# --------------------------------------------------------------------------

def conv1d(x, weight, bias) -> Tensor:
    """Stride-1 valid 1-D convolution, no activation.

    x: (B, m, C); weight: (f, k*C) over flattened windows [x_j, ..., x_{j+k-1}];
    bias: (f,). Output: (B, m-k+1, f).
    """
    x, weight, bias = _as_tensor(x), _as_tensor(weight), _as_tensor(bias)
    if x.ndim != 3:
        raise ShapeError(f"conv1d: expected (B, m, C) input, got {x.shape}")
    B, m, C = x.shape
    f, kc = weight.shape
    if kc % C:
        raise ShapeError(f"conv1d: weight width {kc} not a multiple of {C} channels")
    k = kc // C
    if m < k:
        raise ShapeError(f"conv1d: input length m={m} < kernel k={k}")
    if bias.shape != (f,):
        raise ShapeError(f"conv1d: bias shape {bias.shape} != ({f},)")
    out = kernels.conv1d_forward(x.data, weight.data, bias.data)

    def bwd(g):
        gx, gw, gb = kernels.conv1d_backward(x.data, weight.data,
                                             np.ascontiguousarray(g))
        if x.requires_grad:
            x._accumulate(gx)
        if weight.requires_grad:
            weight._accumulate(gw)
        if bias.requires_grad:
            bias._accumulate(gb)

    return _record(out, (x, weight, bias), "conv1d", bwd)


def maxpool1d(x, size: int = 3) -> Tensor:
    """Non-overlapping max pooling over axis 1 of (B, s, f); remainder dropped."""
    x = _as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"maxpool1d: expected (B, s, f) input, got {x.shape}")
    s = x.shape[1]
    if s < size:
        raise ShapeError(f"maxpool1d: input length s={s} < pool size {size}")
    out, arg = kernels.maxpool1d_forward(x.data, size)

    def bwd(g):
        x._accumulate(kernels.maxpool1d_backward(np.ascontiguousarray(g), arg, s))

    return _record(out, (x,), "maxpool1d", bwd)


# --------------------------------------------------------------------------
# reverse sweep
# --------------------------------------------------------------------------

def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        t, done = stack.pop()
        if done:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for p in t.node.parents:
                if p.node is not None and id(p) not in seen:
                    stack.append((p, False))
    return order


def backward(root: Tensor):
    """Accumulate d(root)/d(leaf) into every reachable leaf that requires grad.

    Intermediate gradients are released after use; leaf gradients accumulate
    across calls until zeroed.
    """
    if root.data.shape != ():
        raise ShapeError(f"backward: root must be a scalar, got shape {root.shape}")
    if root.node is None:
        return
    order = _topological(root)
    for t in order:
        t.grad = None
    root.grad = np.ones(())
    for t in reversed(order):
        g = t.grad
        if g is None:
            continue
        t.grad = None
        t.node.backward(g)


@dataclass
class GradCheckReport:
    max_rel_error: float
    tol: float
    analytic: np.ndarray
    numeric: np.ndarray

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol


# relative error denominators never drop below this, so gradients that are
# zero up to round-off compare on an absolute scale
REL_FLOOR = 1e-6


def grad_check(f, x: Tensor, h: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Compare the tape gradient of scalar ``f(x)`` with central differences."""
    if h <= 0:
        raise ValueError("grad_check: step h must be positive")
    was = x.requires_grad
    x.requires_grad = True
    x.grad = None
    out = f(x)
    if out.data.shape != ():
        raise ShapeError(f"grad_check: f must be scalar-valued, got shape {out.shape}")
    backward(out)
    analytic = np.zeros(x.shape) if x.grad is None else x.grad.copy()
    x.grad = None

    numeric = np.zeros(x.shape)
    flat = x.data.reshape(-1)
    nflat = numeric.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f(x).data)
            flat[i] = orig - h
            fm = float(f(x).data)
            flat[i] = orig
            nflat[i] = (fp - fm) / (2.0 * h)
    x.requires_grad = was

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    err = float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
    return GradCheckReport(err, tol, analytic, numeric)
