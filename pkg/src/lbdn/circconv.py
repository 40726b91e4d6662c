"""1-Lipschitz circular convolution layers realized in the Fourier domain.

A multichannel circular convolution with kernel ``K`` (``c_out x c_in x s x s``)
is block-diagonalized by the 2-D DFT: bin ``(u, v)`` carries the small complex
channel-mixing matrix ``K_hat[:, :, u, v] = s^2 * fft2_batch(K)[:, :, u, v]``
(the ``s^2`` comes from the ``1/s`` normalization of each DFT factor). The
Cayley transform commutes with this similarity, so the layer is realized by
one complex Cayley transform per bin.

Tensors follow the layout ``(batch, channel, row, col)``; vectorization is
row-major over ``(channel, row, col)``.
"""

from dataclasses import dataclass

import numpy as np

from .activations import get_activation
from .cayley import CayleyFactors, cayley, cayley_complex
from .exceptions import DimensionError, DomainError, InternalConsistencyError, SingularMatrixError
from .numerics import fft2_batch, ifft2_batch
from .sandwich import RealizedLayer, sandwich_apply

IMAG_TOL = 1e-6
DENSE_MAX_SIZE = 8


@dataclass
class ConvParams:
    """Free parameters: ``P`` of shape ``(p + q, q, s, s)``, ``d`` and ``b`` of length ``q``.

    ``P[:q]`` is the ``X`` kernel (``q x q``) and ``P[q:]`` the ``Y`` kernel (``p x q``).
    """

    P: np.ndarray
    d: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.d = np.asarray(self.d, dtype=float).reshape(-1)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.P.ndim != 4 or self.P.shape[2] != self.P.shape[3] or self.P.shape[2] < 1:
            raise DimensionError(f"P must have shape (p+q, q, s, s), got {self.P.shape}")
        q = self.P.shape[1]
        if self.P.shape[0] <= q:
            raise DimensionError(f"P needs more than q = {q} leading channels, got {self.P.shape[0]}")
        if self.d.shape != (q,) or self.b.shape != (q,):
            raise DimensionError(f"d and b must have length {q}")
        for name in ("P", "d", "b"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")

    @property
    def q(self):
        return self.P.shape[1]

    @property
    def p(self):
        return self.P.shape[0] - self.q

    @property
    def s(self):
        return self.P.shape[2]

    @classmethod
    def random(cls, p, q, s, seed=0, scale=1.0):
        rng = np.random.default_rng(seed)
        return cls(
            P=scale * rng.standard_normal((p + q, q, s, s)),
            d=rng.normal(0.0, 0.5, size=q),
            b=rng.standard_normal(q),
        )


@dataclass(frozen=True)
class SpectrumCache:
    """Per-bin factors ``A_hat[u, v]`` (``q x q``) and ``B_hat[u, v]`` (``q x p``)."""

    A_hat: np.ndarray  # (s, s, q, q)
    B_hat: np.ndarray  # (s, s, q, p)
    psi: np.ndarray

    @property
    def s(self):
        return self.A_hat.shape[0]

    def residual(self):
        """Largest per-bin ``||A A^* + B B^* - I||_F``."""
        A, B = self.A_hat, self.B_hat
        G = A @ np.conj(np.swapaxes(A, -1, -2)) + B @ np.conj(np.swapaxes(B, -1, -2))
        return float(np.max(np.linalg.norm(G - np.eye(A.shape[-1]), axis=(-2, -1))))


def kernel_symbol(K):
    """Per-bin channel matrices ``(s, s, c_out, c_in)`` of a real kernel."""
    K = np.asarray(K, dtype=float)
    s = K.shape[-1]
    return np.moveaxis(s * s * fft2_batch(K), (-2, -1), (0, 1))


def _bins(s, reduced):
    cols = range(s // 2 + 1) if reduced else range(s)
    return [(u, v) for u in range(s) for v in cols]


def conv_realize(params, reduced=True):
    """Cayley transform of the kernel symbol in every frequency bin.

    With ``reduced=True`` only the ``s x (s//2 + 1)`` bins are transformed and
    the rest follow from conjugate symmetry of real kernels.

    Raises:
        SingularMatrixError: conditioning failure, naming the offending bin.
    """
    q, p, s = params.q, params.p, params.s
    sym = kernel_symbol(params.P)
    A_hat = np.zeros((s, s, q, q), dtype=complex)
    B_hat = np.zeros((s, s, q, p), dtype=complex)
    for u, v in _bins(s, reduced):
        try:
            f = cayley_complex(sym[u, v, :q], sym[u, v, q:])
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"frequency bin ({u}, {v}): {exc}") from exc
        A_hat[u, v], B_hat[u, v] = f.A, f.B
    if reduced:
        for v in range(s // 2 + 1, s):
            for u in range(s):
                A_hat[u, v] = np.conj(A_hat[(-u) % s, s - v])
                B_hat[u, v] = np.conj(B_hat[(-u) % s, s - v])
    return SpectrumCache(A_hat=A_hat, B_hat=B_hat, psi=np.exp(params.d))


def _real_part(z, what):
    resid = float(np.max(np.abs(z.imag))) if z.size else 0.0
    if resid > IMAG_TOL:
        raise InternalConsistencyError(f"{what}: imaginary residual {resid:.3e} exceeds {IMAG_TOL}")
    return z.real


def conv_forward(cache, params, h_in, activation="relu"):
    """Apply the convolutional sandwich layer to ``(N, p, s, s)`` images.

    Raises:
        DimensionError: channel count or spatial size does not match.
        InternalConsistencyError: a spatial-domain result is not real to 1e-6.
    """
    sigma, _ = get_activation(activation)
    h = np.asarray(h_in, dtype=float)
    squeeze = h.ndim == 3
    if squeeze:
        h = h[None]
    s, p = cache.s, cache.B_hat.shape[-1]
    if h.ndim != 4 or h.shape[1:] != (p, s, s):
        raise DimensionError(f"expected images of shape (N, {p}, {s}, {s}), got {np.shape(h_in)}")
    psi = cache.psi[None, :, None, None]
    root2 = np.sqrt(2.0)
    h_hat = fft2_batch(h)
    z_hat = root2 * np.einsum("uvoc,ncuv->nouv", cache.B_hat, h_hat) / psi
    z = _real_part(ifft2_batch(z_hat), "pre-activation")
    a_hat = fft2_batch(sigma(z + params.b[None, :, None, None]) * psi)
    A_star = np.conj(np.swapaxes(cache.A_hat, -1, -2))
    out_hat = root2 * np.einsum("uvoc,ncuv->nouv", A_star, a_hat)
    out = _real_part(ifft2_batch(out_hat), "output")
    return out[0] if squeeze else out


def circulant_matrix(kernel):
    """Doubly-circulant matrix ``C`` with ``C @ vec(h) = vec(kernel * h)``.

    ``C[(o, i, j), (c, k, l)] = kernel[o, c, (i - k) % s, (j - l) % s]``.
    """
    K = np.asarray(kernel, dtype=float)
    co, ci, s, _ = K.shape
    idx = np.arange(s)
    di = (idx[:, None] - idx[None, :]) % s  # (i, k)
    blk = K[:, :, di[:, None, :, None], di[None, :, None, :]]  # (o, c, i, j, k, l)
    return blk.transpose(0, 2, 3, 1, 4, 5).reshape(co * s * s, ci * s * s)


def conv_dense_oracle(params):
    """Materialized ``(C_A, C_B)`` from a dense real Cayley transform.

    Raises:
        DomainError: ``s`` exceeds 8; the oracle is quartic in ``s`` by design.
    """
    if params.s > DENSE_MAX_SIZE:
        raise DomainError(f"dense oracle refuses s = {params.s} > {DENSE_MAX_SIZE}")
    q = params.q
    f = cayley(circulant_matrix(params.P[:q]), circulant_matrix(params.P[q:]))
    return f.A, f.B


def dense_layer(params, C_A=None, C_B=None):
    """The convolutional layer as an ordinary sandwich layer on vectorized images."""
    if C_A is None:
        C_A, C_B = conv_dense_oracle(params)
    n = params.s * params.s
    return RealizedLayer(
        psi=np.repeat(np.exp(params.d), n), factors=CayleyFactors(A=C_A, B=C_B), b=np.repeat(params.b, n),
    )


def conv_dense_forward(params, h_in, activation="relu", layer=None):
    """Reference evaluation through the dense doubly-circulant matrices."""
    h = np.asarray(h_in, dtype=float)
    squeeze = h.ndim == 3
    if squeeze:
        h = h[None]
    if layer is None:
        layer = dense_layer(params)
    out = sandwich_apply(layer, h.reshape(h.shape[0], -1), activation)
    out = out.reshape(h.shape[0], params.q, params.s, params.s)
    return out[0] if squeeze else out
