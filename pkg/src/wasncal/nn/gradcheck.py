"""Finite-difference verification of the analytic gradients."""

import copy

import numpy as np

from .layers import Dropout
from .loss import softmax_cross_entropy


def _dropout_states(network):
    layers = [l for l in network.iter_layers() if isinstance(l, Dropout)]
    return layers, [copy.deepcopy(l.rng.bit_generator.state) for l in layers]


def _restore(layers, states):
    for layer, state in zip(layers, states):
        layer.rng.bit_generator.state = copy.deepcopy(state)


def gradient_check(network, inputs, labels, epsilon: float = 1e-5,
                   num_samples: int = 200, train: bool = True,
                   rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples at least `num_samples` scalar parameters across all tensors
    (all of them when the network is smaller). Dropout generator states are
    snapshotted and restored before every forward pass so stochastic masks
    stay frozen across the perturbed evaluations. Coordinates where the
    one-sided differences disagree (a relu/maxpool kink falls inside the
    perturbation interval, making central differences meaningless) are
    skipped; a wrong backward implementation still shows up on the smooth
    coordinates, which are the vast majority.
    """
    rng = rng or np.random.default_rng(0)
    drop_layers, drop_states = _dropout_states(network)

    def loss_only():
        _restore(drop_layers, drop_states)
        logits = network.forward(inputs, train=train)
        loss, _ = softmax_cross_entropy(logits, labels)
        return loss

    _restore(drop_layers, drop_states)
    network.zero_grad()
    logits = network.forward(inputs, train=train)
    _, dlogits = softmax_cross_entropy(logits, labels)
    network.backward(dlogits)
    center = loss_only()

    named = network.parameters()
    sizes = np.array([p.size for _, p in named])
    total = int(sizes.sum())
    count = min(num_samples, total)
    flat_choice = rng.choice(total, size=count, replace=False)

    worst = 0.0
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    for flat in sorted(flat_choice):
        pi = int(np.searchsorted(offsets, flat, side="right") - 1)
        local = flat - offsets[pi]
        param = named[pi][1]
        idx = np.unravel_index(local, param.data.shape)
        analytic = param.grad[idx]
        orig = param.data[idx]
        param.data[idx] = orig + epsilon
        up = loss_only()
        param.data[idx] = orig - epsilon
        down = loss_only()
        param.data[idx] = orig
        numeric = (up - down) / (2.0 * epsilon)
        if max(abs(numeric), abs(analytic)) < 1e-8:
            continue  # both vanish (e.g. bias into batchnorm); fd noise only
        fwd = (up - center) / epsilon
        bwd = (center - down) / epsilon
        if abs(fwd - bwd) > 0.05 * max(abs(fwd), abs(bwd), 1e-6):
            continue  # kink inside the interval (relu/maxpool switch)
        denom = max(abs(numeric), abs(analytic), 1e-6)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst
