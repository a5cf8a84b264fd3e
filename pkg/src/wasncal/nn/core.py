"""Parameters, the layer protocol, and sequential composition."""

import numpy as np

from ..errors import StateError


class Parameter:
    """Dense float64 array with a gradient slot of the same shape."""

    def __init__(self, data):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad[...] = 0.0


class Layer:
    """Forward/backward node; subclasses cache what backward needs."""

    name = "layer"

    def parameters(self) -> list[tuple[str, Parameter]]:
        return []

    def children(self) -> list["Layer"]:
        return []

    def iter_layers(self):
        yield self
        for child in self.children():
            yield from child.iter_layers()

    def forward(self, x, train: bool = False):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError

    def zero_grad(self):
        for _, p in self.parameters():
            p.zero_grad()

    def _require_cache(self, cache, what="forward cache"):
        if cache is None:
            raise StateError(f"{self.name}: backward called before forward ({what} missing)")
        return cache


class Sequential(Layer):
    def __init__(self, layers, name="sequential"):
        self.name = name
        self._layers = list(layers)

    def children(self):
        return list(self._layers)

    def parameters(self):
        out = []
        for i, layer in enumerate(self._layers):
            for pname, p in layer.parameters():
                out.append((f"{self.name}.{i}.{pname}", p))
        return out

    def forward(self, x, train: bool = False):
        for layer in self._layers:
            x = layer.forward(x, train)
        return x

    def backward(self, grad_out):
        for layer in reversed(self._layers):
            grad_out = layer.backward(grad_out)
        return grad_out


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Deterministic orthogonal matrix (QR with sign-fixed diagonal)."""
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))
