"""Empirical lower bounds on the Lipschitz constant of a network.

The estimator runs gradient ascent on the difference quotient
``||f(x + dx) - f(x)|| / ||dx||`` jointly over ``x`` and ``dx``. Chains start
from ``x ~ N(0, I)`` and a Gaussian ``dx`` rescaled to norm 0.1, take
normalized gradient steps with a cosine-decayed step size, and never project
``x`` onto a bounded region. Every evaluated quotient is a valid lower
bound, so the best value seen along each chain is kept.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .exceptions import GradientError

DX_FLOOR = 1e-6
DX_INIT_NORM = 0.1


@dataclass
class SearchReport:
    lower_bound: float
    chain_bounds: list
    failures: int = 0
    history: list = field(default_factory=list)


def tape_sandwich(layer, h, activation="relu"):
    """Sandwich layer on the tape with the realized factors held constant."""
    sigma = ad.activation(activation)
    psi = layer.psi if layer.psi is not None else np.ones(layer.A.shape[0])
    u = math.sqrt(2.0) * (h @ layer.B.T) / psi + layer.b
    return math.sqrt(2.0) * (sigma(u) * psi) @ layer.A


def model_function(model):
    """Tape-compatible forward map of a realized model."""
    root_gamma = math.sqrt(model.gamma)

    def f(x):
        h = root_gamma * x
        for layer in model.layers[:-1]:
            h = tape_sandwich(layer, h, model.activation)
        last = model.layers[-1]
        return root_gamma * (h @ last.B.T) + last.b

    return f


def _ratios(f, x, dx):
    num = ad.row_norms(f(x + dx) - f(x))
    return num / ad.row_norms(dx)


def _unit_rows(G):
    nrm = np.linalg.norm(G, axis=1, keepdims=True)
    return np.where(nrm > 0, G / np.where(nrm > 0, nrm, 1.0), 0.0)


def _floor_rows(dx):
    nrm = np.linalg.norm(dx, axis=1, keepdims=True)
    small = nrm[:, 0] < DX_FLOOR
    if np.any(small):
        dx = dx.copy()
        dx[small] = DX_FLOOR * _unit_rows(np.where(nrm[small] > 0, dx[small], 1.0))
    return dx


def _ascent_grads(f, x, dx):
    """Quotients and their gradients for a batch of independent chains."""
    tape = ad.Tape()
    xv, dv = tape.var(x), tape.var(dx)
    r = _ratios(f, xv, dv)
    gx, gd = tape.gradient(ad.sum(r), [xv, dv])
    return ad.value(r), gx, gd


def _draw(rngs, dim, scale):
    x = scale * np.stack([rng.standard_normal(dim) for rng in rngs])
    dx = np.stack([rng.standard_normal(dim) for rng in rngs])
    dx *= DX_INIT_NORM / np.maximum(np.linalg.norm(dx, axis=1, keepdims=True), 1e-300)
    return x, dx


def lipschitz_search(f, dim, restarts=32, iters=500, step=0.05, seed=0, x_scale=1.0, max_failures=None):
    """Run the ascent and return a :class:`SearchReport`.

    ``f`` maps a batch of row inputs (a tape ``Var``) to a batch of outputs
    and must be built from :mod:`lbdn.autodiff` primitives. A chain whose
    gradient turns non-finite is restarted from a fresh draw and counted as
    a failure.
    """
    if restarts < 1 or iters < 1:
        raise ValueError("restarts and iters must be >= 1")
    if max_failures is None:
        max_failures = 10 * restarts
    # one generator per chain, so a larger run extends a smaller one
    rngs = [np.random.default_rng([*np.atleast_1d(seed), i]) for i in range(restarts)]
    x, dx = _draw(rngs, dim, x_scale)
    best = np.zeros(restarts)
    failures = 0
    history = []
    for t in range(iters):
        lr = step * 0.5 * (1.0 + math.cos(math.pi * t / iters))
        try:
            r, gx, gd = _ascent_grads(f, x, dx)
            bad = ~(np.isfinite(r) & np.all(np.isfinite(gx), axis=1) & np.all(np.isfinite(gd), axis=1))
        except (GradientError, FloatingPointError):
            r, gx, gd = np.zeros(restarts), np.zeros_like(x), np.zeros_like(dx)
            bad = np.zeros(restarts, dtype=bool)
            for i in range(restarts):
                try:
                    ri, gxi, gdi = _ascent_grads(f, x[i:i + 1], dx[i:i + 1])
                    r[i], gx[i], gd[i] = ri[0], gxi[0], gdi[0]
                    bad[i] = not (np.isfinite(ri[0]) and np.all(np.isfinite(gxi)) and np.all(np.isfinite(gdi)))
                except (GradientError, FloatingPointError):
                    bad[i] = True
        if np.any(bad):
            failures += int(bad.sum())
            if failures > max_failures:
                raise GradientError(f"{failures} chain failures exceed the budget of {max_failures}")
            x[bad], dx[bad] = _draw([rngs[i] for i in np.flatnonzero(bad)], dim, x_scale)
            r = np.where(bad, 0.0, r)
        best = np.maximum(best, r)
        history.append(float(best.max()))
        x = x + lr * _unit_rows(gx)
        dx = _floor_rows(dx + lr * DX_INIT_NORM * _unit_rows(gd))
    # the final iterate is a candidate too
    r_final = _safe_ratios(f, x, dx)
    best = np.maximum(best, r_final)
    return SearchReport(lower_bound=float(best.max()), chain_bounds=best.tolist(), failures=failures, history=history)


def _safe_ratios(f, x, dx):
    r = np.asarray(ad.value(_ratios(f, x, dx)), dtype=float)
    return np.where(np.isfinite(r), r, 0.0)


def empirical_lipschitz(f, dim, restarts=32, iters=500, step=0.05, seed=0, **kwargs):
    """Lower bound on the global Lipschitz constant of ``f``.

    Example:
        >>> round(empirical_lipschitz(lambda x: 2.0 * x, dim=3, restarts=2, iters=5), 9)
        2.0
    """
    return lipschitz_search(f, dim, restarts, iters, step, seed, **kwargs).lower_bound


def tightness(model, restarts=32, iters=500, step=0.05, seed=0):
    """Empirical lower bound divided by the certified ``gamma``, clamped to ``[0, 1]``."""
    lower = empirical_lipschitz(model_function(model), model.widths[0], restarts, iters, step, seed)
    return float(min(max(lower / model.gamma, 0.0), 1.0))


def layer_pieces(model):
    """The network as a chain of maps with their certified bounds.

    The first piece absorbs the input scaling ``sqrt(gamma)`` and the last is
    the linear output map, so the bounds multiply to ``gamma``.
    """
    root_gamma = math.sqrt(model.gamma)
    act = model.activation
    pieces = []
    L = model.depth
    for k, layer in enumerate(model.layers[:-1]):
        scale = root_gamma if k == 0 else 1.0
        pieces.append((
            f"sandwich_{k}", layer.B.shape[1], scale,
            lambda h, layer=layer, scale=scale: tape_sandwich(layer, scale * h, act),
        ))
    last = model.layers[-1]
    out_scale = root_gamma if L > 0 else model.gamma
    pieces.append((f"output_{L}", last.B.shape[1], out_scale, lambda h: out_scale * (h @ last.B.T) + last.b))
    return pieces


def per_layer_report(model, restarts=8, iters=200, step=0.05, seed=0):
    """Per-piece lower bounds and tightness ratios."""
    rows = []
    for k, (name, dim, bound, f) in enumerate(layer_pieces(model)):
        lower = empirical_lipschitz(f, dim, restarts, iters, step, [seed, k])
        rows.append({
            "layer": name, "bound": float(bound), "lower_bound": float(lower),
            "tightness": float(min(max(lower / bound, 0.0), 1.0)) if bound > 0 else 0.0,
        })
    return rows


def lipest_report(model, restarts=32, iters=500, step=0.05, seed=0, per_layer=True, layer_restarts=8, layer_iters=200):
    """JSON-ready summary ``{gamma, lower_bound, tightness, failures, per_layer}``."""
    search = lipschitz_search(model_function(model), model.widths[0], restarts, iters, step, seed)
    report = {
        "gamma": float(model.gamma),
        "lower_bound": search.lower_bound,
        "tightness": float(min(max(search.lower_bound / model.gamma, 0.0), 1.0)),
        "failures": search.failures,
        "per_layer": [],
    }
    if per_layer:
        report["per_layer"] = per_layer_report(model, layer_restarts, layer_iters, step, seed)
    return report
