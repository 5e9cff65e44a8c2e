import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from genma import layers as L
from genma import tensor as tn
from genma.tensor import ShapeError, Tensor


def sig(z):
    return 1.0 / (1.0 + math.exp(-z))


class TestEmbedding:
    def test_one_hot(self):
        layer = L.EmbeddingLayer(4, "onehot")
        np.testing.assert_array_equal(L.embed([2], layer).data, [[0, 0, 1, 0]])
        assert layer.dim == 4 and layer.params() == {}

    def test_padding_zero(self, rng):
        for mode in ("onehot", "learned"):
            layer = L.EmbeddingLayer(5, mode, 3, rng)
            np.testing.assert_array_equal(L.embed([0], layer).data, 0.0)

    def test_learned_is_table_lookup(self, rng):
        layer = L.EmbeddingLayer(6, "learned", 3, rng)
        ids = [3, 1, 5]
        np.testing.assert_array_equal(L.embed(ids, layer).data, layer.table.data[ids])

    def test_out_of_range(self, rng):
        with pytest.raises(IndexError):
            L.embed([4], L.EmbeddingLayer(4, "learned", 2, rng))


class TestConv:
    def test_hand_example(self):
        layer = L.Conv1DLayer(1, filters=1, kernel=2)
        layer.weight.data[...] = [[1.0, 1.0]]
        out = L.conv1d_forward(Tensor(np.array([[1.0], [2.0], [3.0]])), layer)
        np.testing.assert_array_equal(out.data, [[3.0], [5.0]])

    def test_default_length(self, rng):
        layer = L.Conv1DLayer(4, 32, 3, rng)
        assert L.conv1d_forward(Tensor(rng.normal(size=(280, 4))), layer).shape == (278, 32)

    def test_zero_in_zero_out(self):
        layer = L.Conv1DLayer(3, 4, 3)
        np.testing.assert_array_equal(L.conv1d_forward(Tensor(np.zeros((6, 3))), layer).data, 0.0)

    def test_too_short(self):
        with pytest.raises(ShapeError):
            L.conv1d_forward(Tensor(np.zeros((2, 1))), L.Conv1DLayer(1, 1, 3))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(3, 300), st.sampled_from([2, 3, 5]))
    def test_length_formula(self, m, k):
        layer = L.Conv1DLayer(2, 3, k)
        if m < k:
            with pytest.raises(ShapeError):
                L.conv1d_forward(Tensor(np.ones((m, 2))), layer)
            return
        out = L.conv1d_forward(Tensor(np.ones((m, 2))), layer)
        assert out.shape == (m - k + 1, 3)


class TestMaxPool:
    def test_hand_example(self):
        out = L.maxpool1d(Tensor(np.array([1, 5, 2, 4, 4, 4, 9.0]).reshape(7, 1)))
        np.testing.assert_array_equal(out.data.ravel(), [5, 4])

    def test_constant(self):
        np.testing.assert_array_equal(L.maxpool1d(Tensor(np.full((9, 2), 3.0))).data, 3.0)

    def test_length(self):
        assert L.maxpool1d(Tensor(np.zeros((278, 1)))).shape == (92, 1)

    def test_too_short(self):
        with pytest.raises(ShapeError):
            L.maxpool1d(Tensor(np.zeros((2, 1))))

    def test_gradient_mass_conserved(self, rng):
        for _ in range(10):
            x = Tensor(rng.normal(size=(2, 11, 4)), requires_grad=True)
            g = rng.normal(size=(2, 3, 4))
            tn.backward(tn.sum_all(tn.hadamard(tn.maxpool1d(x, 3), Tensor(g))))
            np.testing.assert_allclose(x.grad.sum(axis=1), g.sum(axis=1), rtol=1e-14)


class TestBiLSTM:
    def test_zero_weights(self):
        layer = L.BiLSTMLayer(3, 4)
        for p in layer.params().values():
            p.data[...] = 0.0
        out = L.bilstm_forward(Tensor(np.ones((5, 3))), layer)
        assert out.shape == (5, 8)
        np.testing.assert_array_equal(out.data, 0.0)

    def test_single_cell_by_hand(self):
        layer = L.BiLSTMLayer(1, 1)
        vals = {"i": (0.5, -0.3, 0.1), "f": (0.2, 0.4, 1.0), "o": (-0.6, 0.8, 0.2), "q": (0.9, 1.1, -0.4)}
        for d, sign in (("fwd", 1.0), ("bwd", -1.0)):
            for g, (wh, wx, b) in vals.items():
                layer.weights[d][g].data[...] = [[wh, sign * wx]]
                layer.biases[d][g].data[...] = [b]
        x = 0.7
        expected = []
        for sign in (1.0, -1.0):
            # h_0 = c_0 = 0, so only the x-weights and biases act
            i = sig(sign * vals["i"][1] * x + vals["i"][2])
            o = sig(sign * vals["o"][1] * x + vals["o"][2])
            q = math.tanh(sign * vals["q"][1] * x + vals["q"][2])
            c = i * q
            expected.append(o * math.tanh(c))
        out = L.bilstm_forward(Tensor([[x]]), layer).data
        np.testing.assert_allclose(out, [expected], rtol=1e-14)

    def test_two_steps_by_hand(self):
        layer = L.BiLSTMLayer(1, 1)
        w = {"i": (0.5, -0.3, 0.1), "f": (0.2, 0.4, 1.0), "o": (-0.6, 0.8, 0.2), "q": (0.9, 1.1, -0.4)}
        for d in ("fwd", "bwd"):
            for g, (wh, wx, b) in w.items():
                layer.weights[d][g].data[...] = [[wh, wx]]
                layer.biases[d][g].data[...] = [b]

        def run(xs):
            h = c = 0.0
            hs = []
            for x in xs:
                pre = {g: w[g][0] * h + w[g][1] * x + w[g][2] for g in w}
                i, f, o, q = sig(pre["i"]), sig(pre["f"]), sig(pre["o"]), math.tanh(pre["q"])
                c = f * c + i * q
                h = o * math.tanh(c)
                hs.append(h)
            return hs

        xs = [0.7, -1.2]
        fwd = run(xs)
        bwd = run(xs[::-1])[::-1]
        out = L.bilstm_forward(Tensor(np.array(xs).reshape(2, 1)), layer).data
        np.testing.assert_allclose(out, np.column_stack([fwd, bwd]), rtol=1e-13)

    def test_reversal_symmetry(self, rng):
        a = L.BiLSTMLayer(3, 2, rng)
        b = L.BiLSTMLayer(3, 2, rng)
        for g in L.GATES:
            b.weights["fwd"][g].data[...] = a.weights["bwd"][g].data
            b.weights["bwd"][g].data[...] = a.weights["fwd"][g].data
            b.biases["fwd"][g].data[...] = a.biases["bwd"][g].data
            b.biases["bwd"][g].data[...] = a.biases["fwd"][g].data
        x = rng.normal(size=(6, 3))
        out_a = L.bilstm_forward(Tensor(x), a).data
        out_b = L.bilstm_forward(Tensor(x[::-1].copy()), b).data
        np.testing.assert_allclose(out_b[::-1], np.hstack([out_a[:, 2:], out_a[:, :2]]), rtol=1e-13)

    def test_forget_bias_init(self):
        layer = L.BiLSTMLayer(2, 3)
        np.testing.assert_array_equal(layer.biases["fwd"]["f"].data, 1.0)
        np.testing.assert_array_equal(layer.biases["bwd"]["i"].data, 0.0)

    def test_gates_in_unit_interval(self, rng):
        layer = L.BiLSTMLayer(3, 4, rng)
        out = L.bilstm_forward(Tensor(rng.normal(size=(8, 3)) * 5), layer).data
        assert np.all(np.abs(out) < 1) and np.all(np.isfinite(out))

    def test_sum_combine_width(self, rng):
        layer = L.BiLSTMLayer(3, 4, rng, combine="sum")
        assert L.bilstm_forward(Tensor(rng.normal(size=(5, 3))), layer).shape == (5, 4)


class TestAttention:
    def test_identical_rows_uniform(self, rng):
        layer = L.SelfAttentionLayer(4, rng)
        h = np.tile(rng.normal(size=4), (5, 1))
        _, w = L.attention_forward(Tensor(h), [True] * 5, layer)
        np.testing.assert_allclose(w.data, 0.2, rtol=1e-14)

    def test_single_unmasked(self, rng):
        layer = L.SelfAttentionLayer(3, rng)
        h = rng.normal(size=(4, 3))
        r, w = L.attention_forward(Tensor(h), [False, False, True, False], layer)
        np.testing.assert_array_equal(w.data, [0, 0, 1, 0])
        np.testing.assert_array_equal(r.data, h[2])

    def test_hand_evaluation(self):
        layer = L.SelfAttentionLayer(2)
        layer.w_h.data[...] = [0.5, -1.0]
        layer.b_h.data[...] = [0.25]
        h = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
        scores = [math.tanh(0.5 * a - 1.0 * b + 0.25) for a, b in h]
        z = sum(math.exp(s) for s in scores)
        weights = [math.exp(s) / z for s in scores]
        r_expected = [sum(wt * row[d] for wt, row in zip(weights, h)) for d in range(2)]
        r, w = L.attention_forward(Tensor(h), [True] * 3, layer)
        np.testing.assert_allclose(w.data, weights, rtol=1e-14)
        np.testing.assert_allclose(r.data, r_expected, rtol=1e-14)

    def test_all_masked(self, rng):
        with pytest.raises(ValueError):
            L.attention_forward(Tensor(rng.normal(size=(3, 2))), [False] * 3, L.SelfAttentionLayer(2))


class TestDense:
    def test_zero(self):
        layer = L.DenseLayer(4, 3)
        layer.weight.data[...] = 0.0
        np.testing.assert_array_equal(L.dense_forward(Tensor(np.ones(4)), layer).data, 0.0)

    def test_inference_deterministic(self, rng):
        layer = L.DenseLayer(4, 3, rng)
        x = Tensor(rng.normal(size=4))
        a = L.dense_forward(x, layer, training=False, rng=np.random.default_rng(0)).data
        b = L.dense_forward(x, layer, training=False, rng=np.random.default_rng(1)).data
        assert a.tobytes() == b.tobytes()
        np.testing.assert_allclose(a, np.tanh(layer.weight.data @ x.data + layer.bias.data), rtol=1e-15)

    def test_training_reproducible_and_inverted(self, rng):
        layer = L.DenseLayer(6, 50, rng)
        x = Tensor(rng.normal(size=6))
        a = L.dense_forward(x, layer, True, np.random.default_rng(5)).data
        b = L.dense_forward(x, layer, True, np.random.default_rng(5)).data
        assert a.tobytes() == b.tobytes()
        full = L.dense_forward(x, layer).data
        kept = a != 0
        assert 0 < kept.sum() < 50
        np.testing.assert_allclose(a[kept], 2.0 * full[kept], rtol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            L.dense_forward(Tensor(np.ones(3)), L.DenseLayer(4, 2))
