"""Finite-difference gradient checks for every layer in the model stack."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from genma import tensor as tn
from genma.layers import (BiLSTMLayer, Conv1DLayer, DenseLayer, EmbeddingLayer,
                          SelfAttentionLayer)
from genma.tensor import Tensor, grad_check
from genma.train import cross_entropy


@dataclass
class LayerResult:
    layer: str
    max_rel_error: float
    checks: int
    tol: float

    @property
    def passed(self):
        return self.max_rel_error <= self.tol

    def line(self):
        status = "ok" if self.passed else "FAIL"
        return (f"{self.layer:<14} max_rel_error={self.max_rel_error:.3e} "
                f"checks={self.checks} tol={self.tol:.0e} {status}")


def _projected(out: Tensor, proj: np.ndarray) -> Tensor:
    # a fixed random projection turns any output into a scalar with dense gradient
    return tn.sum_all(tn.hadamard(out, Tensor(proj)))


def _uniform(rng, shape):
    return rng.uniform(-2.0, 2.0, size=shape)


def _check_all(build, targets, rng, h, tol):
    """``build()`` returns a scalar Tensor; every tensor in ``targets`` is checked."""
    worst = 0.0
    for t in targets:
        report = grad_check(lambda _x: build(), t, h=h, tol=tol)
        worst = max(worst, report.max_rel_error)
    return worst, len(targets)


def _embedding_case(rng, h, tol):
    layer = EmbeddingLayer(6, "learned", 4, rng)
    layer.table.data[...] = _uniform(rng, layer.table.shape)
    ids = rng.integers(0, 6, size=(2, 5))
    proj = rng.normal(size=(2, 5, 4))
    return _check_all(lambda: _projected(layer(ids), proj), [layer.table], rng, h, tol)


def _conv_case(rng, h, tol):
    layer = Conv1DLayer(3, filters=4, kernel=3, rng=rng)
    layer.weight.data[...] = _uniform(rng, layer.weight.shape)
    layer.bias.data[...] = _uniform(rng, layer.bias.shape)
    x = Tensor(_uniform(rng, (2, 7, 3)), requires_grad=True)
    proj = rng.normal(size=(2, 5, 4))
    return _check_all(lambda: _projected(layer(x), proj),
                      [x, layer.weight, layer.bias], rng, h, tol)


def _pool_case(rng, h, tol):
    x = Tensor(_uniform(rng, (2, 10, 3)), requires_grad=True)
    proj = rng.normal(size=(2, 3, 3))
    return _check_all(lambda: _projected(tn.maxpool1d(x, 3), proj), [x], rng, h, tol)


def _lstm_case(rng, h, tol):
    layer = BiLSTMLayer(3, hidden=2, rng=rng)
    for p in layer.params().values():
        p.data[...] = _uniform(rng, p.shape)
    x = Tensor(_uniform(rng, (2, 4, 3)), requires_grad=True)
    proj = rng.normal(size=(2, 4, 4))
    return _check_all(lambda: _projected(layer(x), proj),
                      [x] + list(layer.params().values()), rng, h, tol)


def _attention_case(rng, h, tol):
    layer = SelfAttentionLayer(4, rng)
    layer.w_h.data[...] = _uniform(rng, layer.w_h.shape)
    layer.b_h.data[...] = _uniform(rng, layer.b_h.shape)
    hs = Tensor(_uniform(rng, (2, 5, 4)), requires_grad=True)
    mask = np.ones((2, 5), dtype=bool)
    mask[1, 3:] = False
    proj = rng.normal(size=(2, 4))
    return _check_all(lambda: _projected(layer(hs, mask)[0], proj),
                      [hs, layer.w_h, layer.b_h], rng, h, tol)


def _dense_case(rng, h, tol):
    layer = DenseLayer(5, 4, rng, dropout=0.5)
    layer.weight.data[...] = _uniform(rng, layer.weight.shape)
    layer.bias.data[...] = _uniform(rng, layer.bias.shape)
    x = Tensor(_uniform(rng, (3, 5)), requires_grad=True)
    proj = rng.normal(size=(3, 4))
    mask_seed = int(rng.integers(2**31))

    def build():
        # a fresh rng with a fixed seed gives the same dropout mask every call
        out = layer(x, training=True, rng=np.random.default_rng(mask_seed))
        return _projected(out, proj)

    return _check_all(build, [x, layer.weight, layer.bias], rng, h, tol)


def _softmax_case(rng, h, tol):
    x = Tensor(_uniform(rng, (3, 4)), requires_grad=True)
    proj = rng.normal(size=(3, 4))
    return _check_all(lambda: _projected(tn.softmax_rows(x), proj), [x], rng, h, tol)


def _cross_entropy_case(rng, h, tol):
    logits = Tensor(_uniform(rng, (4, 3)), requires_grad=True)
    labels = rng.integers(0, 3, size=4)
    return _check_all(lambda: cross_entropy(tn.softmax_rows(logits), labels),
                      [logits], rng, h, tol)


CASES = {
    "embedding": _embedding_case,
    "conv1d": _conv_case,
    "maxpool1d": _pool_case,
    "bilstm": _lstm_case,
    "self_attention": _attention_case,
    "dense": _dense_case,
    "softmax": _softmax_case,
    "cross_entropy": _cross_entropy_case,
}


def run_suite(seed=0, n_inputs=10, h=1e-5, tol=1e-4) -> list[LayerResult]:
    results = []
    for i, (name, case) in enumerate(CASES.items()):
        worst, checks = 0.0, 0
        for k in range(n_inputs):
            rng = np.random.default_rng([seed, i, k])
            err, n = case(rng, h, tol)
            worst, checks = max(worst, err), checks + n
        results.append(LayerResult(name, worst, checks, tol))
    return results
