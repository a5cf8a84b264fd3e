"""Adam optimizer with bias correction."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingDivergence
from .core import Parameter


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)


def init_adam(named_params: list[tuple[str, Parameter]], lr: float = 3e-4,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    state.first_moment = [np.zeros_like(p.data) for _, p in named_params]
    state.second_moment = [np.zeros_like(p.data) for _, p in named_params]
    return state


def adam_step(named_params: list[tuple[str, Parameter]], state: AdamState) -> None:
    """One in-place bias-corrected Adam update from the stored gradients."""
    if len(named_params) != len(state.first_moment):
        raise ValueError("optimizer state does not match the parameter list")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for i, (name, p) in enumerate(named_params):
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise TrainingDivergence(f"non-finite gradient in {name}")
        m = state.first_moment[i]
        v = state.second_moment[i]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
