"""Independent verification of the Lipschitz certificate.

Everything here works from explicit weights (or from the realized factors,
for the chordal blocks and weighted bounds) and never trusts the
parameterization itself.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import DimensionError, DomainError
from .numerics import min_eig_sym, pinv, sigma_max
from .sandwich import boundary_psi, extract_weights

PSD_TOL = 1e-8


@dataclass
class ChordalBlock:
    offset: int  # row/column offset of the block inside H
    matrix: np.ndarray


@dataclass
class WeightedSpectralReport:
    first: float
    interior_pinv: list
    interior_transpose: list
    last: float
    product: float
    product_transpose: float
    naive_norms: list
    naive_product: float

    @property
    def bounds(self):
        return [self.first, *self.interior_pinv, self.last]


@dataclass
class CertificateReport:
    gamma: float
    H_min_eig: float
    psd: bool
    chordal_blocks_min_eigs: list = field(default_factory=list)
    chordal_residual: float | None = None
    per_layer_weighted_bounds: list = field(default_factory=list)
    interior_transpose_bounds: list = field(default_factory=list)
    weighted_product: float | None = None
    naive_spectral_product: float | None = None
    layer_spectral_norms: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _check_chain(W):
    if not W:
        raise DimensionError("need at least one weight matrix")
    for k in range(1, len(W)):
        if W[k].shape[1] != W[k - 1].shape[0]:
            raise DimensionError(f"W[{k}] has {W[k].shape[1]} columns, W[{k - 1}] has {W[k - 1].shape[0]} rows")


def block_offsets(widths):
    return np.concatenate([[0], np.cumsum(widths)]).astype(int)


def assemble_H(W, Lambda, gamma):
    """Block-tridiagonal LMI matrix.

    Diagonal blocks ``(gamma I, 2 Lambda_0, ..., 2 Lambda_{L-1}, gamma I)`` and
    sub-diagonal blocks ``-Lambda_k W_k`` (``-W_L`` for the output layer).
    """
    W = [np.atleast_2d(np.asarray(Wk, dtype=float)) for Wk in W]
    _check_chain(W)
    L = len(W) - 1
    if len(Lambda) != L:
        raise DimensionError(f"expected {L} multipliers, got {len(Lambda)}")
    Lambda = [np.asarray(lam, dtype=float).reshape(-1) for lam in Lambda]
    for k, lam in enumerate(Lambda):
        if lam.shape != (W[k].shape[0],):
            raise DimensionError(f"Lambda[{k}] must have length {W[k].shape[0]}")
        if np.any(lam <= 0):
            raise DomainError(f"Lambda[{k}] must be strictly positive")
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    widths = [W[0].shape[1]] + [Wk.shape[0] for Wk in W]
    off = block_offsets(widths)
    H = np.zeros((off[-1], off[-1]))
    for i in range(L + 2):
        sl = slice(off[i], off[i + 1])
        H[sl, sl] = gamma * np.eye(widths[i]) if i in (0, L + 1) else 2.0 * np.diag(Lambda[i - 1])
    for k in range(L + 1):
        blk = -(Lambda[k][:, None] * W[k]) if k < L else -W[k]
        rows, cols = slice(off[k + 1], off[k + 2]), slice(off[k], off[k + 1])
        H[rows, cols] = blk
        H[cols, rows] = blk.T
    return H


def chordal_blocks(model):
    """PSD blocks ``H_k`` whose lifted sum reproduces ``H``.

    Block ``k`` covers the pair of variable groups ``(k, k+1)``.
    """
    gamma = model.gamma
    L = model.depth
    W = extract_weights(model).W
    widths = model.widths
    off = block_offsets(widths)
    if L == 0:
        n0, n1 = widths
        H0 = np.block([[gamma * np.eye(n0), -W[0].T], [-W[0], gamma * np.eye(n1)]])
        return [ChordalBlock(0, H0)]
    blocks = []
    first = model.layers[0]
    P0 = np.diag(first.psi)
    m0 = first.A.shape[0]
    off_diag = -np.sqrt(2.0 * gamma) * P0 @ first.B
    blocks.append(ChordalBlock(0, np.block([
        [gamma * np.eye(widths[0]), off_diag.T],
        [off_diag, 2.0 * P0 @ (np.eye(m0) - first.A @ first.A.T) @ P0],
    ])))
    for k in range(1, L):
        prev, cur = model.layers[k - 1], model.layers[k]
        Pp, Pc = np.diag(prev.psi), np.diag(cur.psi)
        mk = cur.A.shape[0]
        lower = -2.0 * Pc @ cur.B @ prev.A.T @ Pp
        blocks.append(ChordalBlock(int(off[k]), np.block([
            [2.0 * Pp @ prev.A @ prev.A.T @ Pp, lower.T],
            [lower, 2.0 * Pc @ (np.eye(mk) - cur.A @ cur.A.T) @ Pc],
        ])))
    prev = model.layers[L - 1]
    Pp = np.diag(prev.psi)
    blocks.append(ChordalBlock(int(off[L]), np.block([
        [2.0 * Pp @ prev.A @ prev.A.T @ Pp, -W[L].T],
        [-W[L], gamma * np.eye(widths[L + 1])],
    ])))
    return blocks


def reassemble(blocks, size):
    H = np.zeros((size, size))
    for blk in blocks:
        n = blk.matrix.shape[0]
        H[blk.offset:blk.offset + n, blk.offset:blk.offset + n] += blk.matrix
    return H


def weighted_spectral_report(model):
    """Layerwise weighted spectral norms whose product bounds the Lipschitz constant.

    Interior bounds are computed with both ``B_k^+`` and ``B_k^T``; the
    pseudoinverse form is the normative one.
    """
    L = model.depth
    W = extract_weights(model).W
    naive = [sigma_max(Wk) for Wk in W]
    psis = boundary_psi(model)
    layers = model.layers
    A_prev = [np.eye(model.widths[0])] + [layer.A for layer in layers]
    first = sigma_max(pinv(layers[0].B) @ (psis[1][:, None] * W[0])) / np.sqrt(2.0)
    inner_p, inner_t = [], []
    for k in range(1, L):
        core = (psis[k + 1][:, None] * W[k]) / psis[k][None, :] @ pinv(A_prev[k].T)
        inner_p.append(0.5 * sigma_max(pinv(layers[k].B) @ core))
        inner_t.append(0.5 * sigma_max(layers[k].B.T @ core))
    last = sigma_max(W[L] / psis[L][None, :] @ pinv(A_prev[L].T)) / np.sqrt(2.0)
    return WeightedSpectralReport(
        first=float(first), interior_pinv=inner_p, interior_transpose=inner_t, last=float(last),
        product=float(first * np.prod(inner_p) * last),
        product_transpose=float(first * np.prod(inner_t) * last),
        naive_norms=naive, naive_product=float(np.prod(naive)),
    )


def certify_weights(W, Lambda, gamma, tol=PSD_TOL):
    """Certificate check from explicit weights alone."""
    H = assemble_H(W, Lambda, gamma)
    lam_min = min_eig_sym(H)
    norms = [sigma_max(Wk) for Wk in W]
    return CertificateReport(
        gamma=float(gamma), H_min_eig=lam_min, psd=bool(lam_min >= -tol),
        naive_spectral_product=float(np.prod(norms)), layer_spectral_norms=norms,
    )


def check_certificate(model, tol=PSD_TOL):
    """Full report for a realized model: LMI, chordal blocks, weighted bounds."""
    weights = extract_weights(model)
    report = certify_weights(weights.W, weights.Lambda, model.gamma, tol)
    blocks = chordal_blocks(model)
    H = assemble_H(weights.W, weights.Lambda, model.gamma)
    report.chordal_blocks_min_eigs = [min_eig_sym(blk.matrix) for blk in blocks]
    report.chordal_residual = float(np.linalg.norm(H - reassemble(blocks, H.shape[0])))
    weighted = weighted_spectral_report(model)
    report.per_layer_weighted_bounds = weighted.bounds
    report.interior_transpose_bounds = weighted.interior_transpose
    report.weighted_product = weighted.product
    return report
