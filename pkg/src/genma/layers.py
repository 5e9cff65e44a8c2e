"""Network layers built on :mod:`genma.tensor`.

All layers take batched input with the batch on axis 0: sequences are
(B, T, channels). The module-level ``*_forward`` helpers also accept a single
unbatched sequence or vector and strip the batch axis again on the way out.
"""

from __future__ import annotations

import numpy as np

from genma import tensor as tn
from genma.tensor import Tensor, ShapeError


def glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    def params(self) -> dict[str, Tensor]:
        return {}


class EmbeddingLayer(Layer):
    """One-hot (E = n, fixed) or learned (n x E table) character embedding."""

    def __init__(self, n, mode="learned", dim=50, rng=None, prefix="embed"):
        if mode not in ("onehot", "learned"):
            raise ValueError(f"unknown embedding mode {mode!r}")
        self.n, self.mode, self.prefix = n, mode, prefix
        if mode == "onehot":
            self.dim = n
            eye = np.eye(n)
            eye[0, 0] = 0.0
            self.table = Tensor(eye)
        else:
            self.dim = dim
            rng = rng if rng is not None else np.random.default_rng(0)
            self.table = tn.parameter(glorot(rng, (n, dim), n, dim), f"{prefix}.table")

    def params(self):
        return {self.table.name: self.table} if self.mode == "learned" else {}

    def __call__(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and ids.max() >= self.n:
            raise IndexError(f"embed: id {int(ids.max())} >= vocabulary size {self.n}")
        return tn.take_rows(self.table, ids)


class Conv1DLayer(Layer):
    def __init__(self, in_channels, filters=32, kernel=3, rng=None, prefix="conv"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.filters, self.kernel = in_channels, filters, kernel
        kc = kernel * in_channels
        self.weight = tn.parameter(glorot(rng, (filters, kc), kc, kernel * filters),
                                   f"{prefix}.weight")
        self.bias = tn.parameter(np.zeros(filters), f"{prefix}.bias")

    def params(self):
        return {self.weight.name: self.weight, self.bias.name: self.bias}

    def out_len(self, m):
        return m - self.kernel + 1

    def __call__(self, x):
        return tn.relu(tn.conv1d(x, self.weight, self.bias))


class MaxPool1DLayer(Layer):
    def __init__(self, size=3):
        self.size = size

    def out_len(self, s):
        return s // self.size

    def __call__(self, x):
        return tn.maxpool1d(x, self.size)


GATES = ("i", "f", "o", "q")


class BiLSTMLayer(Layer):
    """Bidirectional LSTM; per-step outputs of both directions are concatenated.

    Gates per direction: i, f, o use the logistic sigmoid and the candidate q
    uses tanh, all over [h_{t-1}, x_t]. ``combine="sum"`` adds the two
    directions instead of concatenating them.
    """

    def __init__(self, in_dim, hidden=100, rng=None, prefix="lstm", combine="concat"):
        if combine not in ("concat", "sum"):
            raise ValueError(f"unknown combine mode {combine!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_dim, self.hidden, self.combine, self.prefix = in_dim, hidden, combine, prefix
        self.weights: dict[str, dict[str, Tensor]] = {}
        self.biases: dict[str, dict[str, Tensor]] = {}
        for d in ("fwd", "bwd"):
            self.weights[d], self.biases[d] = {}, {}
            for g in GATES:
                self.weights[d][g] = tn.parameter(
                    glorot(rng, (hidden, hidden + in_dim), hidden + in_dim, hidden),
                    f"{prefix}.{d}.W_{g}")
                # forget-gate bias starts at 1
                init = np.ones(hidden) if g == "f" else np.zeros(hidden)
                self.biases[d][g] = tn.parameter(init, f"{prefix}.{d}.b_{g}")

    @property
    def out_dim(self):
        return 2 * self.hidden if self.combine == "concat" else self.hidden

    def params(self):
        out = {}
        for d in ("fwd", "bwd"):
            for g in GATES:
                for t in (self.weights[d][g], self.biases[d][g]):
                    out[t.name] = t
        return out

    def _direction(self, x, d, reverse):
        B, T, _ = x.shape
        H = self.hidden
        w = tn.concat([self.weights[d][g] for g in GATES], axis=0)
        bias = tn.concat([self.biases[d][g] for g in GATES], axis=0)
        w_h = tn.transpose(tn.slice_last(w, 0, H))
        w_x = tn.transpose(tn.slice_last(w, H, H + self.in_dim))
        proj = tn.matmul(tn.reshape(x, (B * T, self.in_dim)), w_x)
        proj = tn.reshape(tn.add_bias(proj, bias), (B, T, 4 * H))

        steps = range(T - 1, -1, -1) if reverse else range(T)
        outs = [None] * T
        h = c = None
        for t in steps:
            z = tn.select_step(proj, t)
            if h is not None:
                z = tn.add(z, tn.matmul(h, w_h))
            i_t = tn.sigmoid(tn.slice_last(z, 0, H))
            f_t = tn.sigmoid(tn.slice_last(z, H, 2 * H))
            o_t = tn.sigmoid(tn.slice_last(z, 2 * H, 3 * H))
            q_t = tn.tanh(tn.slice_last(z, 3 * H, 4 * H))
            # c_0 = 0, so the first step has no forget term
            c = tn.hadamard(i_t, q_t) if c is None else tn.add(
                tn.hadamard(f_t, c), tn.hadamard(i_t, q_t))
            h = tn.hadamard(o_t, tn.tanh(c))
            outs[t] = h
        return tn.stack_steps(outs)

    def __call__(self, x):
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ShapeError(f"bilstm: expected (B, T, {self.in_dim}) input, got {x.shape}")
        if x.shape[1] < 1:
            raise ShapeError("bilstm: zero-length sequence")
        fwd = self._direction(x, "fwd", reverse=False)
        bwd = self._direction(x, "bwd", reverse=True)
        if self.combine == "concat":
            return tn.concat([fwd, bwd], axis=-1)
        return tn.add(fwd, bwd)


class SelfAttentionLayer(Layer):
    """score_t = tanh(w . h_t + b); weights = softmax over unmasked steps."""

    def __init__(self, dim, rng=None, prefix="attn"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.dim = dim
        self.w_h = tn.parameter(glorot(rng, (dim,), dim, 1), f"{prefix}.w_h")
        self.b_h = tn.parameter(np.zeros(1), f"{prefix}.b_h")

    def params(self):
        return {self.w_h.name: self.w_h, self.b_h.name: self.b_h}

    def __call__(self, h, mask):
        B, T, D = h.shape
        if D != self.dim:
            raise ShapeError(f"attention: expected width {self.dim}, got {h.shape}")
        mask = np.asarray(mask, dtype=bool).reshape(B, T)
        if not mask.any(axis=1).all():
            raise ValueError("attention: every position is masked")
        scores = tn.matmul(tn.reshape(h, (B * T, D)), tn.reshape(self.w_h, (D, 1)))
        scores = tn.reshape(tn.tanh(tn.add_bias(scores, self.b_h)), (B, T))
        weights = tn.masked_softmax_rows(scores, mask)
        r = tn.matmul(tn.reshape(weights, (B, 1, T)), h)
        return tn.reshape(r, (B, D)), weights


class DenseLayer(Layer):
    """Fully connected layer; tanh + inverted dropout unless ``activation`` is None."""

    def __init__(self, in_dim, out_dim, rng=None, prefix="dense", activation="tanh",
                 dropout=0.5):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_dim, self.out_dim = in_dim, out_dim
        self.activation, self.dropout = activation, dropout
        self.weight = tn.parameter(glorot(rng, (out_dim, in_dim), in_dim, out_dim),
                                   f"{prefix}.weight")
        self.bias = tn.parameter(np.zeros(out_dim), f"{prefix}.bias")

    def params(self):
        return {self.weight.name: self.weight, self.bias.name: self.bias}

    def __call__(self, x, training=False, rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"dense: expected (B, {self.in_dim}) input, got {x.shape}")
        y = tn.add_bias(tn.matmul(x, tn.transpose(self.weight)), self.bias)
        if self.activation == "tanh":
            y = tn.tanh(y)
        if training and self.dropout > 0:
            if rng is None:
                raise ValueError("dense: training-mode dropout needs an rng")
            keep = 1.0 - self.dropout
            mask = (rng.random(y.shape) < keep) / keep
            y = tn.hadamard(y, Tensor(mask))
        return y


# ---------------------------------------------------------------------------
# helpers accepting unbatched input
# ---------------------------------------------------------------------------

def _batched(x, ndim):
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim == ndim - 1:
        return tn.reshape(x, (1,) + x.shape), True
    return x, False


def _unbatch(y, squeeze):
    return tn.reshape(y, y.shape[1:]) if squeeze else y


def embed(ids, layer: EmbeddingLayer):
    return layer(ids)


def conv1d_forward(x, layer: Conv1DLayer):
    x, sq = _batched(x, 3)
    return _unbatch(layer(x), sq)


def maxpool1d(x, size=3):
    x, sq = _batched(x, 3)
    return _unbatch(tn.maxpool1d(x, size), sq)


def bilstm_forward(x, layer: BiLSTMLayer):
    x, sq = _batched(x, 3)
    return _unbatch(layer(x), sq)


def attention_forward(h, mask, layer: SelfAttentionLayer):
    h, sq = _batched(h, 3)
    r, w = layer(h, np.asarray(mask, dtype=bool).reshape(h.shape[0], h.shape[1]))
    return _unbatch(r, sq), _unbatch(w, sq)


def dense_forward(x, layer: DenseLayer, training=False, rng=None):
    x, sq = _batched(x, 2)
    return _unbatch(layer(x, training=training, rng=rng), sq)
