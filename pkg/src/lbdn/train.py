"""Gradient-based training of LBDNs through the full parameterization.

The parameterization is re-recorded on an autodiff tape for every step, so
gradients flow through weight normalization, the Cayley solve and the
exponential scalings. Whatever values the optimizer produces, the realized
network stays certified.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .exceptions import DivergenceError, DomainError
from .lipest import tightness
from .sandwich import NORM_GUARD, forward, init_params, realize

PARAM_NAMES = ("X", "Y", "b", "g", "h", "d")


# -- parameter plumbing ------------------------------------------------------


def param_arrays(params):
    """``(layer, name, array)`` for every trainable entry, scalars as 0-d arrays."""
    out = []
    for k, lp in enumerate(params.layers):
        for name in PARAM_NAMES:
            val = getattr(lp, name)
            if val is None:
                continue
            out.append((k, name, np.asarray(val, dtype=float)))
    return out


def set_param_arrays(params, entries):
    for k, name, arr in entries:
        lp = params.layers[k]
        setattr(lp, name, float(arr) if name in ("g", "h") else np.asarray(arr, dtype=float))


@dataclass
class TapeLayer:
    A_t: ad.Var  # A^T
    B_t: ad.Var  # B^T
    psi: ad.Var | None
    b: ad.Var


def _tape_normalized(M, scale):
    if np.linalg.norm(ad.value(M)) < NORM_GUARD:
        return scale * M
    return scale * M / ad.frobenius(M)


def tape_cayley(X, Y):
    """Cayley factors ``(A^T, B^T)`` recorded on the tape."""
    m = ad.value(X).shape[0]
    I = np.eye(m)
    Z = X - X.T + Y.T @ Y
    M = Z + I
    A_t = ad.solve(M, I - Z)
    B_t = -2.0 * ad.solve(M.T, Y.T).T
    return A_t, B_t


def tape_realize(tape, params):
    """Record ``realize`` on ``tape``; returns (tape layers, leaf vars by entry)."""
    leaves = {}
    layers = []
    for k, lp in enumerate(params.layers):
        v = {}
        for name in PARAM_NAMES:
            val = getattr(lp, name)
            if val is not None:
                v[name] = leaves[(k, name)] = tape.var(val)
        A_t, B_t = tape_cayley(_tape_normalized(v["X"], v["g"]), _tape_normalized(v["Y"], v["h"]))
        psi = ad.exp(v["d"]) if "d" in v else None
        layers.append(TapeLayer(A_t=A_t, B_t=B_t, psi=psi, b=v["b"]))
    return layers, leaves


def tape_forward(layers, x, gamma, activation="relu"):
    """LBDN forward pass over row-batched inputs on the tape."""
    sigma = ad.activation(activation)
    root2 = math.sqrt(2.0)
    h = math.sqrt(gamma) * x
    for layer in layers[:-1]:
        u = root2 * (h @ layer.B_t) / layer.psi + layer.b
        h = root2 * (sigma(u) * layer.psi) @ layer.A_t.T
    last = layers[-1]
    return math.sqrt(gamma) * (h @ last.B_t) + last.b


def mse(pred, target):
    return ad.mean(ad.square(pred - target))


def grad(params, loss_fn):
    """Loss value and exact gradients for every parameter entry.

    ``loss_fn(layers)`` receives the tape-realized layers and returns a scalar
    ``Var``. Gradients come back as ``(layer, name, array)`` triples matching
    :func:`param_arrays`.
    """
    tape = ad.Tape()
    layers, leaves = tape_realize(tape, params)
    loss = loss_fn(layers)
    keys = list(leaves)
    grads = tape.gradient(loss, [leaves[key] for key in keys])
    return float(loss.value), [(k, name, g) for (k, name), g in zip(keys, grads)]


def mse_grad(params, X, y):
    return grad(params, lambda layers: mse(tape_forward(layers, X, params.gamma, params.activation), y))


# -- optimizer and schedule --------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, arrays, **kwargs):
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **kwargs)

    def update(self, arrays, grads, lr):
        """One Adam step; returns the new arrays."""
        self.step += 1
        b1, b2 = self.beta1, self.beta2
        out = []
        for i, (a, g) in enumerate(zip(arrays, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.step)
            v_hat = self.v[i] / (1 - b2 ** self.step)
            out.append(a - lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


@dataclass
class TrainConfig:
    gamma: float = 1.0
    depth: int = 8
    width: int = 86
    epochs: int = 200
    batch_size: int = 50
    max_lr: float = 0.01
    seed: int = 0
    n_train: int = 300
    n_test: int = 200
    activation: str = "relu"
    warmup_frac: float = 0.5
    # estimator settings used for the final tightness entry of the metrics
    lipest: dict = field(default_factory=dict)
    final_tightness: bool = True

    def __post_init__(self):
        for name in ("gamma", "width", "batch_size", "max_lr", "n_train", "n_test"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0 or self.depth < 0:
            raise ValueError("epochs and depth must be non-negative")
        if not 0.0 < self.warmup_frac < 1.0:
            raise ValueError("warmup_frac must lie in (0, 1)")

    @property
    def widths(self):
        return [1] + [self.width] * self.depth + [1]


def lr_at(epoch, config):
    """Piecewise triangular schedule: ramp ``0 -> max_lr`` then decay to 0.

    ``epoch`` may be fractional (per-step interpolation).
    """
    E = config.epochs
    knee = config.warmup_frac * E
    if epoch <= knee:
        return config.max_lr * epoch / knee
    return config.max_lr * max(E - epoch, 0.0) / (E - knee)


# -- the square-wave task ----------------------------------------------------


def square_wave(x):
    """1 on ``[-2, -1) U [0, 1)``, 0 on ``[-1, 0) U [1, 2]``."""
    xa = np.asarray(x, dtype=float)
    if np.any((xa < -2.0) | (xa > 2.0)) or not np.all(np.isfinite(xa)):
        raise DomainError("square_wave is defined on [-2, 2]")
    out = (((xa >= -2.0) & (xa < -1.0)) | ((xa >= 0.0) & (xa < 1.0))).astype(float)
    return float(out) if np.ndim(x) == 0 else out


def square_wave_data(config):
    rng = np.random.default_rng(config.seed)
    x_train = rng.uniform(-2.0, 2.0, size=(config.n_train, 1))
    x_test = rng.uniform(-2.0, 2.0, size=(config.n_test, 1))
    return x_train, square_wave(x_train), x_test, square_wave(x_test)


@dataclass
class FitResult:
    params: object
    metrics: list

    @property
    def model(self):
        return realize(self.params)


def _eval_mse(params, X, y):
    if X is None:
        return float("nan")
    pred = forward(realize(params), X)
    return float(np.mean((pred - y) ** 2))


def train(params, X, y, config, X_test=None, y_test=None, callback=None):
    """Minimize MSE with Adam and the triangular schedule.

    ``params`` is updated in place and also returned inside the result. The
    ``callback(epoch, params, row)`` hook runs after every epoch.

    Raises:
        DivergenceError: the loss became non-finite.
    """
    rng = np.random.default_rng([config.seed, 1])
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(len(X), -1)
    if y_test is not None:
        y_test = np.asarray(y_test, dtype=float).reshape(len(X_test), -1)
    entries = param_arrays(params)
    state = AdamState.zeros_like([a for _, _, a in entries])
    n = len(X)
    steps = max(1, math.ceil(n / config.batch_size))
    metrics = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for s in range(steps):
            idx = order[s * config.batch_size:(s + 1) * config.batch_size]
            loss, grads = mse_grad(params, X[idx], y[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became non-finite at epoch {epoch}", epoch=epoch)
            lr = lr_at(epoch + s / steps, config)
            arrays = state.update([a for _, _, a in entries], [g for _, _, g in grads], lr)
            entries = [(k, name, a) for (k, name, _), a in zip(entries, arrays)]
            set_param_arrays(params, entries)
        row = {
            "epoch": epoch,
            "lr": lr_at(epoch, config),
            "train_mse": _eval_mse(params, X, y),
            "test_mse": _eval_mse(params, X_test, y_test),
            "tightness": float("nan"),
        }
        if not np.isfinite(row["train_mse"]):
            raise DivergenceError(f"training loss became non-finite at epoch {epoch}", epoch=epoch)
        metrics.append(row)
        if callback is not None:
            callback(epoch, params, row)
    return FitResult(params=params, metrics=metrics)


def fit(config, callback=None):
    """Train a depth/width LBDN on the square-wave regression task."""
    x_train, y_train, x_test, y_test = square_wave_data(config)
    params = init_params(config.widths, config.gamma, seed=config.seed, activation=config.activation)
    result = train(params, x_train, y_train, config, x_test, y_test, callback=callback)
    if config.final_tightness and result.metrics:
        result.metrics[-1]["tightness"] = tightness(result.model, seed=config.seed, **config.lipest)
    return result
