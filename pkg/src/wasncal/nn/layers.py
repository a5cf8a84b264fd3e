"""Layer implementations: dense, conv, pooling, batchnorm, GRU, pooling stats.

All activations are float64. Convolutions use "same" padding (odd kernels)
so the time/frequency extents survive each block; pooling floors the
remainder away.
"""

import numpy as np
from scipy.special import expit

from ..errors import ShapeError, StateError
from .core import Layer, Parameter, glorot_uniform, orthogonal


class Dense(Layer):
    def __init__(self, in_dim, out_dim, rng, name="dense"):
        self.name = name
        self.in_dim, self.out_dim = int(in_dim), int(out_dim)
        self.weight = Parameter(glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim))
        self.bias = Parameter(np.zeros(out_dim))
        self._x = None

    def parameters(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"{self.name}: expected (B, {self.in_dim}), got {x.shape}")
        self._x = x
        return x @ self.weight.data + self.bias.data

    def backward(self, grad_out):
        x = self._require_cache(self._x)
        self.weight.grad += x.T @ grad_out
        self.bias.grad += grad_out.sum(axis=0)
        return grad_out @ self.weight.data.T


class ReLU(Layer):
    def __init__(self, name="relu"):
        self.name = name
        self._mask = None

    def forward(self, x, train=False):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad_out):
        return grad_out * self._require_cache(self._mask)


class Softmax(Layer):
    """Row-wise softmax over the last axis."""

    def __init__(self, name="softmax"):
        self.name = name
        self._y = None

    def forward(self, x, train=False):
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        self._y = e / e.sum(axis=-1, keepdims=True)
        return self._y

    def backward(self, grad_out):
        y = self._require_cache(self._y)
        inner = (grad_out * y).sum(axis=-1, keepdims=True)
        return y * (grad_out - inner)


class Dropout(Layer):
    """Inverted dropout; active only in train mode."""

    def __init__(self, p, rng, name="dropout"):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"{name}: dropout probability must lie in [0, 1)")
        self.name = name
        self.p = float(p)
        self.rng = rng
        self._mask = None

    def forward(self, x, train=False):
        if not train or self.p == 0.0:
            self._mask = 1.0
            return x
        self._mask = (self.rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self._mask

    def backward(self, grad_out):
        return grad_out * self._require_cache(self._mask)


class Conv1d(Layer):
    """Same-padded 1D convolution over (B, C, T); odd kernel sizes."""

    def __init__(self, in_channels, out_channels, kernel, rng, name="conv1d"):
        if kernel % 2 != 1:
            raise ValueError(f"{name}: kernel must be odd for same padding")
        self.name = name
        self.in_channels, self.out_channels, self.kernel = in_channels, out_channels, kernel
        fan_in, fan_out = in_channels * kernel, out_channels * kernel
        self.weight = Parameter(glorot_uniform(rng, (out_channels, in_channels, kernel),
                                               fan_in, fan_out))
        self.bias = Parameter(np.zeros(out_channels))
        self._xp = None

    def parameters(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(f"{self.name}: expected (B, {self.in_channels}, T), got {x.shape}")
        pad = self.kernel // 2
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad))) if pad else x
        self._xp = xp
        t = x.shape[2]
        y = np.broadcast_to(self.bias.data[None, :, None],
                            (x.shape[0], self.out_channels, t)).copy()
        for j in range(self.kernel):
            y += np.tensordot(xp[:, :, j:j + t], self.weight.data[:, :, j],
                              axes=([1], [1])).transpose(0, 2, 1)
        return y

    def backward(self, grad_out):
        xp = self._require_cache(self._xp)
        pad = self.kernel // 2
        t = grad_out.shape[2]
        self.bias.grad += grad_out.sum(axis=(0, 2))
        dxp = np.zeros_like(xp)
        for j in range(self.kernel):
            self.weight.grad[:, :, j] += np.tensordot(
                grad_out, xp[:, :, j:j + t], axes=([0, 2], [0, 2]))
            dxp[:, :, j:j + t] += np.tensordot(
                grad_out, self.weight.data[:, :, j], axes=([1], [0])).transpose(0, 2, 1)
        return dxp[:, :, pad:pad + t] if pad else dxp


class Conv2d(Layer):
    """Same-padded 2D convolution over (B, C, F, T); odd kernel sizes."""

    def __init__(self, in_channels, out_channels, kernel, rng, name="conv2d"):
        kf, kt = kernel
        if kf % 2 != 1 or kt % 2 != 1:
            raise ValueError(f"{name}: kernel must be odd for same padding")
        self.name = name
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel = (kf, kt)
        fan_in, fan_out = in_channels * kf * kt, out_channels * kf * kt
        self.weight = Parameter(glorot_uniform(rng, (out_channels, in_channels, kf, kt),
                                               fan_in, fan_out))
        self.bias = Parameter(np.zeros(out_channels))
        self._xp = None

    def parameters(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(f"{self.name}: expected (B, {self.in_channels}, F, T), got {x.shape}")
        kf, kt = self.kernel
        pf, pt = kf // 2, kt // 2
        xp = np.pad(x, ((0, 0), (0, 0), (pf, pf), (pt, pt)))
        self._xp = xp
        b, _, f, t = x.shape
        y = np.broadcast_to(self.bias.data[None, :, None, None],
                            (b, self.out_channels, f, t)).copy()
        for i in range(kf):
            for j in range(kt):
                y += np.tensordot(xp[:, :, i:i + f, j:j + t],
                                  self.weight.data[:, :, i, j],
                                  axes=([1], [1])).transpose(0, 3, 1, 2)
        return y

    def backward(self, grad_out):
        xp = self._require_cache(self._xp)
        kf, kt = self.kernel
        pf, pt = kf // 2, kt // 2
        f, t = grad_out.shape[2], grad_out.shape[3]
        self.bias.grad += grad_out.sum(axis=(0, 2, 3))
        dxp = np.zeros_like(xp)
        for i in range(kf):
            for j in range(kt):
                self.weight.grad[:, :, i, j] += np.tensordot(
                    grad_out, xp[:, :, i:i + f, j:j + t], axes=([0, 2, 3], [0, 2, 3]))
                dxp[:, :, i:i + f, j:j + t] += np.tensordot(
                    grad_out, self.weight.data[:, :, i, j],
                    axes=([1], [0])).transpose(0, 3, 1, 2)
        return dxp[:, :, pf:pf + f, pt:pt + t]


class MaxPool2d(Layer):
    """Max pooling over (B, C, F, T) with floor semantics."""

    def __init__(self, pool, name="maxpool2d"):
        self.name = name
        self.pool = tuple(pool)
        self._cache = None

    def forward(self, x, train=False):
        if x.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4D input, got {x.shape}")
        pf, pt = self.pool
        b, c, f, t = x.shape
        f2, t2 = f // pf, t // pt
        if f2 == 0 or t2 == 0:
            raise ShapeError(f"{self.name}: input {x.shape} smaller than pool {self.pool}")
        windows = (x[:, :, :f2 * pf, :t2 * pt]
                   .reshape(b, c, f2, pf, t2, pt)
                   .transpose(0, 1, 2, 4, 3, 5)
                   .reshape(b, c, f2, t2, pf * pt))
        idx = windows.argmax(axis=-1)
        self._cache = (x.shape, idx)
        return np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]

    def backward(self, grad_out):
        shape, idx = self._require_cache(self._cache)
        pf, pt = self.pool
        b, c, f, t = shape
        f2, t2 = f // pf, t // pt
        d = np.zeros((b, c, f2, t2, pf * pt))
        np.put_along_axis(d, idx[..., None], grad_out[..., None], axis=-1)
        dx = np.zeros(shape)
        dx[:, :, :f2 * pf, :t2 * pt] = (d.reshape(b, c, f2, t2, pf, pt)
                                        .transpose(0, 1, 2, 4, 3, 5)
                                        .reshape(b, c, f2 * pf, t2 * pt))
        return dx


class BatchNorm(Layer):
    """Normalization over the channel axis (axis 1); feature axis for 2D."""

    def __init__(self, num_features, momentum=0.9, eps=1e-5, name="batchnorm"):
        self.name = name
        self.num_features = int(num_features)
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(num_features))
        self.beta = Parameter(np.zeros(num_features))
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)
        self._cache = None

    def parameters(self):
        return [(f"{self.name}.gamma", self.gamma), (f"{self.name}.beta", self.beta)]

    def _axes_and_shape(self, x):
        if x.shape[1] != self.num_features:
            raise ShapeError(f"{self.name}: expected {self.num_features} channels on "
                             f"axis 1, got {x.shape}")
        axes = (0,) + tuple(range(2, x.ndim))
        bshape = (1, self.num_features) + (1,) * (x.ndim - 2)
        return axes, bshape

    def forward(self, x, train=False):
        axes, bshape = self._axes_and_shape(x)
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(bshape)) * inv_std.reshape(bshape)
        self._cache = (xhat, inv_std, axes, bshape, train)
        return self.gamma.data.reshape(bshape) * xhat + self.beta.data.reshape(bshape)

    def backward(self, grad_out):
        xhat, inv_std, axes, bshape, train = self._require_cache(self._cache)
        self.gamma.grad += (grad_out * xhat).sum(axis=axes)
        self.beta.grad += grad_out.sum(axis=axes)
        gx = grad_out * self.gamma.data.reshape(bshape)
        if not train:
            return gx * inv_std.reshape(bshape)
        m = gx.mean(axis=axes).reshape(bshape)
        mx = (gx * xhat).mean(axis=axes).reshape(bshape)
        return inv_std.reshape(bshape) * (gx - m - xhat * mx)


class _GruCell:
    """Single GRU layer over a (B, D, T) sequence.

    Gates: z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br),
    candidate n = tanh(x Wn + (r * h) Un + bn), h' = (1 - z) n + z h.
    """

    def __init__(self, input_size, hidden_size, rng, name):
        self.name = name
        self.input_size, self.hidden_size = input_size, hidden_size
        d, h = input_size, hidden_size

        def w_in():
            return Parameter(glorot_uniform(rng, (d, h), d, h))

        self.Wz, self.Wr, self.Wn = w_in(), w_in(), w_in()
        self.Uz = Parameter(orthogonal(rng, h))
        self.Ur = Parameter(orthogonal(rng, h))
        self.Un = Parameter(orthogonal(rng, h))
        self.bz = Parameter(np.zeros(h))
        self.br = Parameter(np.zeros(h))
        self.bn = Parameter(np.zeros(h))
        self._cache = None

    def parameters(self):
        names = ("Wz", "Wr", "Wn", "Uz", "Ur", "Un", "bz", "br", "bn")
        return [(f"{self.name}.{n}", getattr(self, n)) for n in names]

    def forward_seq(self, x):
        b, d, t = x.shape
        if d != self.input_size:
            raise ShapeError(f"{self.name}: expected {self.input_size} input features, "
                             f"got {x.shape}")
        h = np.zeros((b, self.hidden_size))
        steps = []
        out = np.empty((b, self.hidden_size, t))
        for i in range(t):
            xt = x[:, :, i]
            z = expit(xt @ self.Wz.data + h @ self.Uz.data + self.bz.data)
            r = expit(xt @ self.Wr.data + h @ self.Ur.data + self.br.data)
            n = np.tanh(xt @ self.Wn.data + (r * h) @ self.Un.data + self.bn.data)
            h_new = (1.0 - z) * n + z * h
            steps.append((xt, h, z, r, n))
            h = h_new
            out[:, :, i] = h
        self._cache = steps
        return out

    def backward_seq(self, dh_seq):
        steps = self._cache
        if steps is None:
            raise StateError(f"{self.name}: backward called before forward")
        b, _, t = dh_seq.shape
        dx_seq = np.empty((b, self.input_size, t))
        carry = np.zeros((b, self.hidden_size))
        for i in reversed(range(t)):
            dh = dh_seq[:, :, i] + carry
            xt, h_prev, z, r, n = steps[i]
            dz = dh * (h_prev - n) * z * (1.0 - z)
            dn = dh * (1.0 - z) * (1.0 - n ** 2)
            drh = dn @ self.Un.data.T  # gradient w.r.t. r * h_prev
            dr = drh * h_prev * r * (1.0 - r)
            self.Wz.grad += xt.T @ dz
            self.Wr.grad += xt.T @ dr
            self.Wn.grad += xt.T @ dn
            self.Uz.grad += h_prev.T @ dz
            self.Ur.grad += h_prev.T @ dr
            self.Un.grad += (r * h_prev).T @ dn
            self.bz.grad += dz.sum(axis=0)
            self.br.grad += dr.sum(axis=0)
            self.bn.grad += dn.sum(axis=0)
            dx_seq[:, :, i] = dz @ self.Wz.data.T + dr @ self.Wr.data.T + dn @ self.Wn.data.T
            carry = dh * z + drh * r + dz @ self.Uz.data.T + dr @ self.Ur.data.T
        return dx_seq


class Gru(Layer):
    """Stacked GRU over (B, D, T); returns the last step of the top layer."""

    def __init__(self, input_size, hidden_size, rng, num_layers=2, name="gru"):
        self.name = name
        self.hidden_size = hidden_size
        self.cells = [
            _GruCell(input_size if i == 0 else hidden_size, hidden_size, rng,
                     name=f"{name}.l{i}")
            for i in range(num_layers)
        ]
        self._t = None

    def parameters(self):
        return [p for cell in self.cells for p in cell.parameters()]

    def forward(self, x, train=False):
        if x.ndim != 3:
            raise ShapeError(f"{self.name}: expected (B, D, T), got {x.shape}")
        seq = x
        for cell in self.cells:
            seq = cell.forward_seq(seq)
        self._t = seq.shape[2]
        return seq[:, :, -1]

    def backward(self, grad_out):
        t = self._require_cache(self._t)
        dh_seq = np.zeros((grad_out.shape[0], self.hidden_size, t))
        dh_seq[:, :, -1] = grad_out
        for cell in reversed(self.cells):
            dh_seq = cell.backward_seq(dh_seq)
        return dh_seq


class StatsPool(Layer):
    """Concatenated per-channel mean and standard deviation over time.

    (B, C, T) -> (B, 2C); the first C outputs are means, the rest are
    standard deviations.
    """

    EPS = 1e-8

    def __init__(self, name="stats_pool"):
        self.name = name
        self._cache = None

    def forward(self, x, train=False):
        if x.ndim != 3:
            raise ShapeError(f"{self.name}: expected (B, C, T), got {x.shape}")
        mean = x.mean(axis=2)
        std = np.sqrt(x.var(axis=2) + self.EPS)
        self._cache = (x, mean, std)
        return np.concatenate([mean, std], axis=1)

    def backward(self, grad_out):
        x, mean, std = self._require_cache(self._cache)
        c = x.shape[1]
        t = x.shape[2]
        gm = grad_out[:, :c]
        gs = grad_out[:, c:]
        dx = np.repeat(gm[:, :, None] / t, t, axis=2)
        dx += gs[:, :, None] * (x - mean[:, :, None]) / (t * std[:, :, None])
        return dx


class FoldFreqIntoChannels(Layer):
    """(B, C, F, T) -> (B, C*F, T) reshape between conv2d and conv1d stages."""

    def __init__(self, name="fold_freq"):
        self.name = name
        self._shape = None

    def forward(self, x, train=False):
        if x.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4D input, got {x.shape}")
        self._shape = x.shape
        b, c, f, t = x.shape
        return x.reshape(b, c * f, t)

    def backward(self, grad_out):
        shape = self._require_cache(self._shape)
        return grad_out.reshape(shape)
