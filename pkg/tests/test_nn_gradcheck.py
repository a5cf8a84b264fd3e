"""Finite-difference gradient verification for every layer kind and the
full model graphs at reduced widths."""

import numpy as np
import pytest

from wasncal.models import DistanceCrnn, DistanceMlp, RVectorExtractor
from wasncal.nn import (
    BatchNorm, Conv1d, Conv2d, Dense, Dropout, Gru, MaxPool2d, ReLU,
    Sequential, Softmax, StatsPool, gradient_check,
)
from wasncal.nn.layers import FoldFreqIntoChannels

TOL = 1e-4


def check(net, x, labels, **kw):
    return gradient_check(net, x, labels, epsilon=1e-5,
                          rng=np.random.default_rng(7), **kw)


def rng():
    return np.random.default_rng(0)


class TestLayerKinds:
    def test_dense(self):
        r = rng()
        net = Sequential([Dense(6, 8, r), ReLU(), Dense(8, 4, r)])
        assert check(net, r.standard_normal((5, 6)), r.integers(0, 4, 5)) < TOL

    def test_softmax_layer(self):
        r = rng()
        net = Sequential([Dense(6, 4, r), Softmax(), Dense(4, 3, r)])
        assert check(net, r.standard_normal((5, 6)), r.integers(0, 3, 5)) < TOL

    def test_dropout_frozen_masks(self):
        r = rng()
        net = Sequential([Dense(6, 16, r), ReLU(),
                          Dropout(0.5, np.random.default_rng(3)), Dense(16, 4, r)])
        assert check(net, r.standard_normal((5, 6)), r.integers(0, 4, 5)) < TOL

    def test_conv1d(self):
        r = rng()
        net = Sequential([Conv1d(3, 5, 3, r), ReLU(), StatsPool(), Dense(10, 4, r)])
        assert check(net, r.standard_normal((4, 3, 9)), r.integers(0, 4, 4)) < TOL

    def test_conv2d_maxpool(self):
        r = rng()
        net = Sequential([Conv2d(1, 3, (3, 3), r), ReLU(), MaxPool2d((2, 2)),
                          FoldFreqIntoChannels(), StatsPool(), Dense(24, 3, r)])
        assert check(net, r.standard_normal((3, 1, 8, 9)), r.integers(0, 3, 3)) < TOL

    def test_batchnorm_train_mode(self):
        r = rng()
        net = Sequential([Dense(5, 8, r), BatchNorm(8), ReLU(), Dense(8, 3, r)])
        assert check(net, r.standard_normal((6, 5)), r.integers(0, 3, 6)) < TOL

    def test_batchnorm_conv_axes(self):
        r = rng()
        net = Sequential([Conv1d(2, 4, 3, r), BatchNorm(4), ReLU(),
                          StatsPool(), Dense(8, 3, r)])
        assert check(net, r.standard_normal((4, 2, 7)), r.integers(0, 3, 4)) < TOL

    def test_gru(self):
        r = rng()
        net = Sequential([Gru(5, 7, r, num_layers=1), Dense(7, 3, r)])
        assert check(net, r.standard_normal((3, 5, 6)), r.integers(0, 3, 3)) < TOL

    def test_gru_stacked(self):
        r = rng()
        net = Sequential([Gru(4, 6, r, num_layers=2), Dense(6, 3, r)])
        assert check(net, r.standard_normal((3, 4, 5)), r.integers(0, 3, 3)) < TOL

    def test_stats_pool(self):
        r = rng()
        net = Sequential([Conv1d(2, 6, 1, r), StatsPool(), Dense(12, 3, r)])
        assert check(net, r.standard_normal((4, 2, 8)), r.integers(0, 3, 4)) < TOL


class TestFullGraphs:
    def test_mlp_reduced(self):
        r = np.random.default_rng(1)
        net = DistanceMlp(feature_dim=12, hidden=16, num_classes=8, seed=2)
        x = r.standard_normal((6, 12))
        assert check(net, x, r.integers(0, 8, 6), num_samples=250) < TOL

    def test_mlp_with_rvector_input(self):
        r = np.random.default_rng(2)
        net = DistanceMlp(feature_dim=10, use_rvector=True, rvector_dim=6,
                          hidden=12, num_classes=5, seed=3)
        x = (r.standard_normal((4, 10)), r.standard_normal((4, 6)))
        assert check(net, x, r.integers(0, 5, 4), num_samples=250) < TOL

    def test_crnn_reduced(self):
        r = np.random.default_rng(3)
        net = DistanceCrnn(feature_bins=20, conv_channels=(2, 3),
                           conv1d_channels=(8, 6), gru_hidden=5, head_hidden=6,
                           num_classes=4, seed=4)
        x = r.standard_normal((2, 1, 20, 12))
        assert check(net, x, r.integers(0, 4, 2), num_samples=300) < TOL

    def test_crnn_with_rvector(self):
        r = np.random.default_rng(4)
        net = DistanceCrnn(feature_bins=16, use_rvector=True, rvector_dim=5,
                           conv_channels=(2, 2), conv1d_channels=(6, 5),
                           gru_hidden=4, head_hidden=5, num_classes=3, seed=5)
        x = (r.standard_normal((2, 1, 16, 8)), r.standard_normal((2, 5)))
        assert check(net, x, r.integers(0, 3, 2), num_samples=250) < TOL

    def test_rvector_extractor_reduced(self):
        r = np.random.default_rng(5)
        net = RVectorExtractor(num_rir_classes=5, mfcc_dim=6, channels=8,
                               embed_dim=10, seed=6)
        x = r.standard_normal((3, 6, 11))
        assert check(net, x, r.integers(0, 5, 3), num_samples=300) < TOL


class TestZeroGradient:
    def test_zero_loss_grad_gives_zero_param_grads(self):
        r = rng()
        net = Sequential([Dense(4, 6, r), ReLU(), Dense(6, 3, r)])
        net.forward(r.standard_normal((2, 4)), train=True)
        net.zero_grad()
        net.backward(np.zeros((2, 3)))
        for _, p in net.parameters():
            assert np.all(p.grad == 0.0)
