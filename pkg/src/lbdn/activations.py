"""Slope-restricted activations (slopes in [0, 1]) and their derivatives."""

import numpy as np


def relu(x):
    return np.maximum(x, 0.0)


def relu_grad(x):
    # subgradient at 0 is 0
    return (x > 0).astype(float)


def identity(x):
    return x


def identity_grad(x):
    return np.ones_like(x)


def tanh(x):
    return np.tanh(x)


def tanh_grad(x):
    return 1.0 - np.tanh(x) ** 2


ACTIVATIONS = {
    "relu": (relu, relu_grad),
    "identity": (identity, identity_grad),
    "tanh": (tanh, tanh_grad),
}


def get_activation(name):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None
