"""Shared test utilities: cached square-wave models, random draws and oracles."""

import functools

import numpy as np

from lbdn.sandwich import forward, random_params, realize
from lbdn.train import TrainConfig, fit, mse_grad, param_arrays, set_param_arrays


@functools.lru_cache(maxsize=None)
def trained(gamma, seed=0):
    """Depth-8, width-86 model trained for 200 epochs on the square wave."""
    return fit(TrainConfig(gamma=float(gamma), seed=seed, final_tightness=False))


def random_model(widths, gamma, seed, scale=1.0, activation="relu"):
    return realize(random_params(widths, gamma, seed=seed, scale=scale, activation=activation))


def random_widths(rng, depth, max_width):
    return [int(w) for w in rng.integers(1, max_width + 1, size=depth + 2)]


def lipschitz_pairs(f, dim, n_pairs, rng, scale=2.0):
    """Largest observed ``||f(a) - f(b)|| / ||a - b||`` over random pairs."""
    a = scale * rng.standard_normal((n_pairs, dim))
    b = a + rng.standard_normal((n_pairs, dim)) * rng.uniform(1e-3, 1.0, size=(n_pairs, 1))
    num = np.linalg.norm(f(a) - f(b), axis=1)
    return float(np.max(num / np.linalg.norm(a - b, axis=1)))


def relative_fd_error(params, X, y, eps=1e-5):
    """Worst relative error of tape gradients against central differences per parameter class."""
    _, grads = mse_grad(params, X, y)
    worst = 0.0
    for (k, name, g) in grads:
        base = param_arrays(params)
        arr = next(a for kk, nn, a in base if (kk, nn) == (k, name))
        num = np.zeros_like(arr)
        for pos in np.ndindex(arr.shape):
            vals = []
            for sign in (1.0, -1.0):
                p = params.copy()
                bumped = arr.copy()
                bumped[pos] += sign * eps
                set_param_arrays(p, [(k, name, bumped)])
                vals.append(float(np.mean((forward(realize(p), X) - y) ** 2)))
            num[pos] = (vals[0] - vals[1]) / (2 * eps)
        worst = max(worst, float(np.linalg.norm(g - num) / max(np.linalg.norm(num), 1e-8)))
    return worst
