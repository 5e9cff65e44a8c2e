import math

import numpy as np
import pytest

from genma import tensor as tn
from genma.corpus import load_examples
from genma.fixtures import fixture_path
from genma.models import build_genma, predict_batch
from genma.tensor import Tensor
from genma.train import AdamState, TrainConfig, adam_step, batch_loss, cross_entropy, fit


class TestCrossEntropy:
    def test_certain(self):
        assert abs(float(cross_entropy(Tensor([[1.0, 0.0, 0.0]]), [0]).data)) <= 1e-11

    def test_uniform(self):
        loss = cross_entropy(Tensor(np.full((4, 3), 1 / 3)), [0, 1, 2, 1])
        assert float(loss.data) == pytest.approx(math.log(3), rel=1e-14)

    def test_two_rows(self):
        probs = Tensor([[0.7, 0.2, 0.1], [0.25, 0.25, 0.5]])
        expected = (-math.log(0.7) - math.log(0.5)) / 2
        assert float(cross_entropy(probs, [0, 2]).data) == pytest.approx(expected, rel=1e-14)

    def test_floor(self):
        assert float(cross_entropy(Tensor([[0.0, 1.0, 0.0]]), [0]).data) == pytest.approx(-math.log(1e-12))

    def test_bad_label(self):
        with pytest.raises(ValueError):
            cross_entropy(Tensor([[1 / 3] * 3]), [3])


class TestAdam:
    def test_single_step(self):
        p = tn.parameter(np.zeros(1), "theta")
        p.grad = np.ones(1)
        adam_step({"theta": p}, AdamState(lr=1e-4))
        assert abs(p.data[0] - (-1e-4 / (1 + 1e-8))) <= 1e-12
        assert p.grad is None

    def test_zero_gradient(self):
        p = tn.parameter(np.array([0.3, -2.0]), "theta")
        p.grad = np.zeros(2)
        adam_step({"theta": p}, AdamState())
        np.testing.assert_array_equal(p.data, [0.3, -2.0])

    def test_second_step_not_larger(self):
        p = tn.parameter(np.zeros(1), "theta")
        state = AdamState(lr=1e-3)
        deltas = []
        for _ in range(2):
            before = p.data.copy()
            p.grad = np.ones(1)
            adam_step({"theta": p}, state)
            deltas.append(abs(p.data[0] - before[0]))
        assert deltas[1] <= deltas[0] * (1 + 1e-12)
        assert state.t == 2

    def test_zero_lr_identity(self, rng):
        p = tn.parameter(rng.normal(size=(3, 2)), "w")
        start = p.data.copy()
        state = AdamState(lr=0.0)
        for _ in range(3):
            p.grad = rng.normal(size=(3, 2))
            adam_step({"w": p}, state)
        assert p.data.tobytes() == start.tobytes()

    def test_missing_gradient(self):
        p = tn.parameter(np.zeros(1), "lonely")
        with pytest.raises(ValueError, match="lonely"):
            adam_step({"lonely": p}, AdamState())


@pytest.fixture
def small_model(separable, tiny_genma_spec):
    examples, vocab = separable
    def make(seed=0, **kw):
        return build_genma(tiny_genma_spec(vocab.size, max_len=280, **kw), seed, vocab)
    return make


def test_loss_slope_on_fixed_batch(separable, small_model):
    examples, _ = separable
    model = small_model()
    batch = examples[:6]
    params = model.params()
    state = AdamState(lr=0.01)
    rng = np.random.default_rng(0)
    losses = []
    for _ in range(6):
        with tn.no_grad():
            losses.append(float(batch_loss(model, batch, rng, training=False).data))
        loss = batch_loss(model, batch, rng, training=False)
        tn.backward(loss)
        adam_step(params, state)
    assert all(b < a for a, b in zip(losses, losses[1:])), losses


def test_fit_deterministic(separable, small_model):
    examples, _ = separable
    cfg = TrainConfig(epochs=3, lr=1e-3, seed=5)
    _, h1 = fit(small_model(1), examples, (), cfg)
    _, h2 = fit(small_model(1), examples, (), cfg)
    assert h1 == h2


def test_fit_never_trains_on_validation(separable, small_model):
    examples, _ = separable
    train, valid = examples[:24], examples[24:]
    seen = set()
    ckpt, history = fit(small_model(), train, valid, TrainConfig(epochs=3, seed=1),
                        on_batch=lambda b: seen.update(e.uid for e in b))
    assert seen == {e.uid for e in train}
    assert all("valid_macro_f1" in r for r in history)


def test_early_stopping_and_best_checkpoint(separable, small_model):
    examples, _ = separable
    train, valid = examples[:24], examples[24:]
    model = small_model()
    ckpt, history = fit(model, train, valid, TrainConfig(epochs=40, seed=2, patience=2, lr=1e-5))
    scores = [r["valid_macro_f1"] for r in history]
    best = int(np.argmax(scores))
    assert ckpt.metadata["epoch"] == best + 1
    assert len(history) <= 40
    if len(history) < 40:
        assert len(history) - 1 - best == 2


def test_partial_batch_kept(separable, small_model):
    examples, _ = separable
    sizes = []
    fit(small_model(), examples[:23], (), TrainConfig(epochs=1),
        on_batch=lambda b: sizes.append(len(b)))
    assert sizes == [10, 10, 3]


def test_fit_rejects_empty(small_model):
    with pytest.raises(ValueError):
        fit(small_model(), [], ())


def test_initial_loss_near_ln3(separable, small_model):
    examples, _ = separable
    _, history = fit(small_model(), examples, (), TrainConfig(epochs=1, lr=1e-9))
    assert abs(history[0]["loss"] - math.log(3)) < 0.05
