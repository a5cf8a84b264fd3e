"""Gaussian-process regression baseline from scalar diffuseness to distance.

Zero-mean GP with the gamma-exponential kernel
k(x, x') = sigma^2 exp(-(|x - x'| / length)^gamma), gamma in (0, 2].
Hyperparameters are fit by maximizing the log marginal likelihood over a
coarse grid: length and the noise-to-signal ratio are gridded, gamma comes
from {1, 1.5, 2}, and the signal variance has a closed-form optimum given
the rest.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

LENGTH_GRID = tuple(np.round(np.arange(0.05, 1.01, 0.05), 2))
GAMMA_GRID = (1.0, 1.5, 2.0)
NOISE_GRID = (1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3)
CLAMP = (0.03, 3.0)


class SingularKernel(RuntimeError):
    pass


@dataclass
class GPModel:
    x_train: np.ndarray
    y_train: np.ndarray
    length: float
    gamma: float
    noise_ratio: float
    signal_var: float
    alpha: np.ndarray          # (R + noise I)^-1 y
    log_marginal: float


def _correlation(xa, xb, length, gamma):
    d = np.abs(xa[:, None] - xb[None, :])
    return np.exp(-((d / length) ** gamma))


def _chol_with_jitter(c):
    jitter = 0.0
    for _ in range(8):
        try:
            return cho_factor(c + jitter * np.eye(len(c)), lower=True)
        except np.linalg.LinAlgError:
            jitter = 1e-10 if jitter == 0.0 else jitter * 10.0
            if jitter > 1e-4:
                break
    raise SingularKernel("kernel matrix not positive definite even with jitter")


def _fit_one(x, y, length, gamma, noise_ratio):
    r = _correlation(x, x, length, gamma)
    c = r + noise_ratio * np.eye(len(x))
    factor = _chol_with_jitter(c)
    alpha = cho_solve(factor, y)
    n = len(x)
    signal_var = float(y @ alpha) / n
    if signal_var <= 0.0:
        signal_var = 1e-12
    logdet = 2.0 * np.sum(np.log(np.diag(factor[0])))
    lml = -0.5 * n * (1.0 + math.log(2.0 * math.pi) + math.log(signal_var)) - 0.5 * logdet
    return alpha, signal_var, lml


def gp_fit(zeta, distances, length=None, gamma=None, noise_ratio=None) -> GPModel:
    """Fit the GP; grid-searches any hyperparameter not given explicitly."""
    x = np.asarray(zeta, dtype=np.float64)
    y = np.asarray(distances, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("zeta and distances must be equal-length 1D arrays")
    if len(x) < 10:
        raise ValueError("need at least 10 training pairs")
    lengths = (length,) if length is not None else LENGTH_GRID
    gammas = (gamma,) if gamma is not None else GAMMA_GRID
    noises = (noise_ratio,) if noise_ratio is not None else NOISE_GRID
    best = None
    for g in gammas:
        if not 0.0 < g <= 2.0:
            raise ValueError("gamma must lie in (0, 2]")
        for ln in lengths:
            for nr in noises:
                try:
                    alpha, sv, lml = _fit_one(x, y, ln, g, nr)
                except SingularKernel:
                    continue
                if best is None or lml > best.log_marginal:
                    best = GPModel(x_train=x, y_train=y, length=ln, gamma=g,
                                   noise_ratio=nr, signal_var=sv, alpha=alpha,
                                   log_marginal=lml)
    if best is None:
        raise SingularKernel("no hyperparameter combination produced a valid fit")
    return best


def gp_predict(model: GPModel, zeta) -> np.ndarray:
    """Posterior mean distance, clamped to the modeled range."""
    xq = np.atleast_1d(np.asarray(zeta, dtype=np.float64))
    k = _correlation(xq, model.x_train, model.length, model.gamma)
    mean = k @ model.alpha
    return np.clip(mean, CLAMP[0], CLAMP[1])
