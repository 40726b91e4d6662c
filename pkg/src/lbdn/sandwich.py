"""Direct parameterization of Lipschitz-bounded feedforward networks.

Free parameters (``DirectParams``) map onto realized sandwich layers
(``RealizedModel``) and from there onto explicit weights ``W_k, b_k`` with
diagonal multipliers ``Lambda_k`` that satisfy the network LMI certificate
for the prescribed bound ``gamma`` by construction.

Layer ``k`` (``k = 0..L``) maps width ``n_k`` to ``n_{k+1}``. Hidden layers
(``k < L``) carry a log-scale vector ``d`` of length ``n_{k+1}``; the output
layer has none because its scaling is fixed to ``sqrt(2/gamma)``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .activations import get_activation
from .cayley import CayleyFactors, cayley
from .exceptions import DimensionError

NORM_GUARD = 1e-12


@dataclass
class LayerParams:
    X: np.ndarray
    Y: np.ndarray
    b: np.ndarray
    g: float
    h: float
    d: np.ndarray | None = None

    @property
    def n_in(self):
        return self.Y.shape[0]

    @property
    def n_out(self):
        return self.X.shape[0]


@dataclass
class DirectParams:
    """The unconstrained parameter set for an LBDN of prescribed bound ``gamma``."""

    gamma: float
    layers: list
    activation: str = "relu"

    def __post_init__(self):
        self.validate()

    @property
    def depth(self):
        """Number of hidden layers ``L``."""
        return len(self.layers) - 1

    @property
    def widths(self):
        return [self.layers[0].n_in] + [lp.n_out for lp in self.layers]

    def validate(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        get_activation(self.activation)
        if not self.layers:
            raise DimensionError("at least one layer is required")
        L = len(self.layers) - 1
        prev = None
        for k, lp in enumerate(self.layers):
            m = lp.X.shape[0]
            if lp.X.shape != (m, m):
                raise DimensionError(f"layer {k}: X must be square, got {lp.X.shape}")
            if lp.Y.ndim != 2 or lp.Y.shape[1] != m:
                raise DimensionError(f"layer {k}: Y must be (n_in, {m}), got {lp.Y.shape}")
            if lp.b.shape != (m,):
                raise DimensionError(f"layer {k}: b must have shape ({m},), got {lp.b.shape}")
            if prev is not None and lp.Y.shape[0] != prev:
                raise DimensionError(f"layer {k}: input width {lp.Y.shape[0]} != previous output width {prev}")
            if k < L:
                if lp.d is None or lp.d.shape != (m,):
                    raise DimensionError(f"layer {k}: hidden layer needs d of shape ({m},)")
            elif lp.d is not None:
                raise DimensionError("output layer carries no d")
            for name in ("X", "Y", "b", "d"):
                arr = getattr(lp, name)
                if arr is not None and not np.all(np.isfinite(arr)):
                    raise ValueError(f"layer {k}: {name} has non-finite entries")
            if not (np.isfinite(lp.g) and np.isfinite(lp.h)):
                raise ValueError(f"layer {k}: g, h must be finite")
            prev = m

    def copy(self):
        layers = [
            LayerParams(
                X=lp.X.copy(), Y=lp.Y.copy(), b=lp.b.copy(), g=float(lp.g), h=float(lp.h),
                d=None if lp.d is None else lp.d.copy(),
            )
            for lp in self.layers
        ]
        return DirectParams(gamma=self.gamma, layers=layers, activation=self.activation)


@dataclass(frozen=True)
class RealizedLayer:
    psi: np.ndarray | None  # diagonal of Psi; None for the output layer
    factors: CayleyFactors
    b: np.ndarray

    @property
    def A(self):
        return self.factors.A

    @property
    def B(self):
        return self.factors.B


@dataclass(frozen=True)
class RealizedModel:
    gamma: float
    layers: tuple
    activation: str = "relu"

    @property
    def depth(self):
        return len(self.layers) - 1

    @property
    def widths(self):
        return [self.layers[0].B.shape[1]] + [layer.A.shape[0] for layer in self.layers]

    def __call__(self, x):
        return forward(self, x)


@dataclass
class ExplicitWeights:
    """Standard feedforward weights with their certificate multipliers."""

    gamma: float
    W: list
    b: list
    Lambda: list
    activation: str = "relu"
    meta: dict = field(default_factory=dict)

    @property
    def depth(self):
        return len(self.W) - 1


def _normalized(M, scale):
    nrm = np.linalg.norm(M)
    if nrm < NORM_GUARD:
        return scale * M
    return scale * M / nrm


def realize_layer(lp):
    """Weight-normalize ``X, Y`` and apply the Cayley transform."""
    factors = cayley(_normalized(lp.X, lp.g), _normalized(lp.Y, lp.h))
    psi = None if lp.d is None else np.exp(lp.d)
    return RealizedLayer(psi=psi, factors=factors, b=np.array(lp.b, dtype=float))


def realize(params):
    params.validate()
    layers = tuple(realize_layer(lp) for lp in params.layers)
    return RealizedModel(gamma=float(params.gamma), layers=layers, activation=params.activation)


def sandwich_apply(layer, h_in, activation="relu"):
    """1-Lipschitz sandwich layer ``sqrt(2) A^T Psi sigma(sqrt(2) Psi^{-1} B h + b)``.

    ``h_in`` is a vector or a batch of row vectors.
    """
    sigma, _ = get_activation(activation)
    h = np.asarray(h_in, dtype=float)
    if h.shape[-1] != layer.B.shape[1]:
        raise DimensionError(f"expected input width {layer.B.shape[1]}, got {h.shape[-1]}")
    psi = layer.psi if layer.psi is not None else np.ones(layer.A.shape[0])
    u = np.sqrt(2.0) * (h @ layer.B.T) / psi + layer.b
    return np.sqrt(2.0) * (sigma(u) * psi) @ layer.A


def forward(model, x):
    """Evaluate the LBDN on a vector or a batch of row vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.widths[0]:
        raise DimensionError(f"expected input width {model.widths[0]}, got {x.shape[-1]}")
    root_gamma = np.sqrt(model.gamma)
    h = root_gamma * x
    for layer in model.layers[:-1]:
        h = sandwich_apply(layer, h, model.activation)
    last = model.layers[-1]
    return root_gamma * (h @ last.B.T) + last.b


def boundary_psi(model):
    """Scalings ``Psi_{-1}, Psi_0, ..., Psi_L`` with the two fixed conventions."""
    g = model.gamma
    psis = [np.full(model.widths[0], np.sqrt(g / 2.0))]
    psis += [layer.psi for layer in model.layers[:-1]]
    psis.append(np.full(model.widths[-1], np.sqrt(2.0 / g)))
    return psis


def extract_weights(model):
    """Explicit weights ``W_k = 2 Psi_k^{-1} B_k A_{k-1}^T Psi_{k-1}``.

    The multipliers are ``Lambda_k = Psi_k^2`` for the hidden layers.
    """
    psis = boundary_psi(model)
    W, b, Lam = [], [], []
    A_prev = np.eye(model.widths[0])
    for k, layer in enumerate(model.layers):
        Wk = 2.0 * (layer.B @ A_prev.T) * psis[k][None, :] / psis[k + 1][:, None]
        W.append(Wk)
        b.append(layer.b.copy())
        if k < model.depth:
            Lam.append(layer.psi ** 2)
        A_prev = layer.A
    return ExplicitWeights(gamma=model.gamma, W=W, b=b, Lambda=Lam, activation=model.activation)


def explicit_forward(weights, x):
    """Standard feedforward evaluation ``z_{k+1} = sigma(W_k z_k + b_k)``."""
    sigma, _ = get_activation(weights.activation)
    z = np.asarray(x, dtype=float)
    for Wk, bk in zip(weights.W[:-1], weights.b[:-1]):
        z = sigma(z @ Wk.T + bk)
    return z @ weights.W[-1].T + weights.b[-1]


def _layer_shapes(widths):
    widths = [int(w) for w in widths]
    if len(widths) < 2 or min(widths) < 1:
        raise DimensionError(f"widths must list >= 2 positive sizes, got {widths}")
    return [(widths[k], widths[k + 1]) for k in range(len(widths) - 1)]


def init_params(widths, gamma=1.0, seed=0, activation="relu"):
    """Training initialization: zero-mean Gaussian ``X`` and ``Y``.

    ``X`` (``m x m``) has std ``1/sqrt(m)`` and ``Y`` (``n x m``) has std
    ``1/sqrt(max(n, m))``, which keeps ``||Y||_2`` of order one on square,
    widening and narrowing layers alike. The factor ``B`` then starts with
    a gain near its maximum instead of being crushed by a large ``Y^T Y``.

    ``d = 0`` and ``b = 0``, and ``g, h`` equal the initial Frobenius norms so
    weight normalization starts as a no-op.
    """
    rng = np.random.default_rng(seed)
    shapes = _layer_shapes(widths)
    layers = []
    for k, (n, m) in enumerate(shapes):
        X = rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, m))
        Y = rng.normal(0.0, 1.0 / np.sqrt(max(n, m)), size=(n, m))
        layers.append(
            LayerParams(
                X=X, Y=Y, b=np.zeros(m), g=float(np.linalg.norm(X)), h=float(np.linalg.norm(Y)),
                d=np.zeros(m) if k < len(shapes) - 1 else None,
            )
        )
    return DirectParams(gamma=float(gamma), layers=layers, activation=activation)


def random_params(widths, gamma=1.0, seed=0, scale=1.0, activation="relu"):
    """Generic draw of every parameter class, for property checks."""
    rng = np.random.default_rng(seed)
    shapes = _layer_shapes(widths)
    layers = []
    for k, (n, m) in enumerate(shapes):
        layers.append(
            LayerParams(
                X=scale * rng.standard_normal((m, m)),
                Y=scale * rng.standard_normal((n, m)),
                b=rng.standard_normal(m),
                g=float(rng.uniform(0.2, 3.0)),
                h=float(rng.uniform(0.2, 3.0)),
                d=rng.normal(0.0, 0.5, size=m) if k < len(shapes) - 1 else None,
            )
        )
    return DirectParams(gamma=float(gamma), layers=layers, activation=activation)


def zero_params(widths, gamma=1.0, activation="relu"):
    shapes = _layer_shapes(widths)
    layers = [
        LayerParams(
            X=np.zeros((m, m)), Y=np.zeros((n, m)), b=np.zeros(m), g=0.0, h=0.0,
            d=np.zeros(m) if k < len(shapes) - 1 else None,
        )
        for k, (n, m) in enumerate(shapes)
    ]
    return DirectParams(gamma=float(gamma), layers=layers, activation=activation)


def with_gamma(params, gamma):
    out = params.copy()
    return replace(out, gamma=float(gamma))
