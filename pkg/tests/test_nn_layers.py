import numpy as np
import pytest

from wasncal.errors import ShapeError, StateError
from wasncal.nn import (
    BatchNorm, Conv1d, Conv2d, Dense, Dropout, FoldFreqIntoChannels, Gru,
    MaxPool2d, ReLU, Sequential, Softmax, StatsPool,
)


def rng():
    return np.random.default_rng(0)


class TestDense:
    def test_identity_weights_pass_input_through(self):
        layer = Dense(4, 4, rng())
        layer.weight.data = np.eye(4)
        layer.bias.data = np.zeros(4)
        x = np.arange(8.0).reshape(2, 4)
        assert np.array_equal(layer.forward(x), x)

    def test_closed_form_gradient(self):
        # quadratic loss 1/B * |XW - Y|^2 has dW = 2/B X^T (XW - Y)
        r = rng()
        layer = Dense(3, 2, r)
        x = r.standard_normal((5, 3))
        y = r.standard_normal((5, 2))
        out = layer.forward(x)
        layer.zero_grad()
        layer.backward(2.0 * (out - y) / 5)
        expected = 2.0 / 5 * x.T @ (x @ layer.weight.data - y)
        assert np.allclose(layer.weight.grad, expected)

    def test_shape_error_names_layer(self):
        layer = Dense(3, 2, rng(), name="fc7")
        with pytest.raises(ShapeError, match="fc7"):
            layer.forward(np.zeros((2, 4)))

    def test_backward_before_forward(self):
        layer = Dense(3, 2, rng())
        with pytest.raises(StateError):
            layer.backward(np.zeros((2, 2)))


class TestSoftmax:
    def test_rows_sum_to_one(self):
        r = rng()
        y = Softmax().forward(r.standard_normal((8, 32)) * 10)
        assert np.allclose(y.sum(axis=1), 1.0, atol=1e-6)
        assert np.all((y > 0) & (y < 1))


class TestDropout:
    def test_eval_mode_identity(self):
        layer = Dropout(0.5, rng())
        x = np.ones((4, 10))
        assert np.array_equal(layer.forward(x, train=False), x)

    def test_train_mode_masks_and_scales(self):
        layer = Dropout(0.5, rng())
        x = np.ones((100, 100))
        y = layer.forward(x, train=True)
        kept = y != 0.0
        assert 0.4 < kept.mean() < 0.6
        assert np.allclose(y[kept], 2.0)

    def test_invalid_probability(self):
        with pytest.raises(ValueError):
            Dropout(1.0, rng())


class TestConv:
    def test_conv1d_matches_numpy_correlate(self):
        r = rng()
        layer = Conv1d(1, 1, 3, r)
        x = r.standard_normal((1, 1, 20))
        y = layer.forward(x)
        w = layer.weight.data[0, 0]
        ref = np.correlate(np.pad(x[0, 0], 1), w, mode="valid") + layer.bias.data[0]
        assert np.allclose(y[0, 0], ref)

    def test_conv2d_preserves_extent(self):
        layer = Conv2d(1, 16, (7, 3), rng())
        y = layer.forward(np.zeros((2, 1, 109, 50)))
        assert y.shape == (2, 16, 109, 50)

    def test_conv1d_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            Conv1d(1, 1, 4, rng())


class TestMaxPool:
    def test_floor_semantics(self):
        layer = MaxPool2d((4, 2))
        y = layer.forward(np.zeros((2, 16, 109, 299)))
        assert y.shape == (2, 16, 27, 149)

    def test_forward_backward_roundtrip(self):
        r = rng()
        layer = MaxPool2d((2, 2))
        x = r.standard_normal((1, 1, 4, 4))
        y = layer.forward(x)
        g = layer.backward(np.ones_like(y))
        # gradient lands only on the max positions, one per window
        assert g.sum() == y.size
        assert np.all((g == 0) | (g == 1))


class TestBatchNorm:
    def test_train_normalizes_batch(self):
        r = rng()
        layer = BatchNorm(8)
        x = 3.0 + 2.0 * r.standard_normal((64, 8))
        y = layer.forward(x, train=True)
        assert np.allclose(y.mean(axis=0), 0.0, atol=1e-10)
        assert np.allclose(y.std(axis=0), 1.0, atol=1e-3)

    def test_eval_uses_running_stats(self):
        r = rng()
        layer = BatchNorm(4, momentum=0.0)  # running stats = last batch
        x = r.standard_normal((32, 4)) * 5 + 1
        layer.forward(x, train=True)
        y = layer.forward(x, train=False)
        assert np.allclose(y.mean(axis=0), 0.0, atol=1e-6)

    def test_running_stats_not_parameters(self):
        layer = BatchNorm(4)
        names = [n for n, _ in layer.parameters()]
        assert len(names) == 2  # gamma, beta only


class TestGru:
    def test_returns_last_step_only(self):
        layer = Gru(5, 7, rng(), num_layers=2)
        y = layer.forward(np.random.default_rng(1).standard_normal((3, 5, 11)))
        assert y.shape == (3, 7)

    def test_zero_input_zero_bias_gives_zero_state(self):
        layer = Gru(4, 4, rng(), num_layers=1)
        y = layer.forward(np.zeros((2, 4, 6)))
        assert np.allclose(y, 0.0)

    def test_recurrent_init_orthogonal(self):
        layer = Gru(4, 6, rng(), num_layers=1)
        u = layer.cells[0].Uz.data
        assert np.allclose(u @ u.T, np.eye(6), atol=1e-10)


class TestStatsPool:
    def test_output_width_doubles_channels(self):
        layer = StatsPool()
        y = layer.forward(np.random.default_rng(2).standard_normal((4, 128, 33)))
        assert y.shape == (4, 256)

    def test_mean_and_std_values(self):
        x = np.stack([np.stack([np.arange(5.0)])])  # (1, 1, 5)
        y = StatsPool().forward(x)
        assert y[0, 0] == pytest.approx(2.0)
        assert y[0, 1] == pytest.approx(np.sqrt(2.0), rel=1e-4)


class TestFold:
    def test_shape_and_inverse(self):
        layer = FoldFreqIntoChannels()
        x = np.random.default_rng(3).standard_normal((2, 32, 6, 74))
        y = layer.forward(x)
        assert y.shape == (2, 192, 74)
        assert np.array_equal(layer.backward(y), x)


class TestSequential:
    def test_parameter_names_unique(self):
        r = rng()
        net = Sequential([Dense(4, 4, r, name="a"), ReLU(), Dense(4, 2, r, name="b")])
        names = [n for n, _ in net.parameters()]
        assert len(names) == len(set(names)) == 4

    def test_deterministic_init(self):
        a = Dense(10, 10, np.random.default_rng(5))
        b = Dense(10, 10, np.random.default_rng(5))
        assert np.array_equal(a.weight.data, b.weight.data)
