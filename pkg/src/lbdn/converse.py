"""Completeness constructions: free parameters from admissible weights."""

import numpy as np

from .cayley import RCOND_TOL, inverse_cayley
from .certify import PSD_TOL, assemble_H
from .exceptions import DomainError, InfeasibleError, SeedingError
from .numerics import lu_rcond, min_eig_sym, pinv, random_orthogonal, svd
from .sandwich import DirectParams, LayerParams

MAX_REDRAWS = 16
FACTOR_TOL = 1e-8


def _invertible_plus_identity(A):
    return lu_rcond(np.eye(A.shape[0]) + A.T) >= RCOND_TOL


def _rotations(n, seed):
    for attempt in range(MAX_REDRAWS):
        yield random_orthogonal(n, [*np.atleast_1d(seed), attempt])


def linear_factors(W, seed=0):
    """``(A, B)`` from the SVD of ``W`` with ``2 A^T B = W`` and ``A A^T + B B^T = I``."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    q, p = W.shape
    Uw, S, Vw = svd(W)
    if S.size and S[0] > 1.0 + 1e-10:
        raise DomainError(f"||W|| = {S[0]:.12g} exceeds 1")
    r = min(p, q)
    sig = np.zeros(q)
    sig[:r] = np.clip(S[:r], 0.0, 1.0)
    up, down = np.sqrt(1.0 + sig), np.sqrt(1.0 - sig)
    Sa = np.diag(0.5 * (up + down))
    Sb = np.zeros((q, p))
    Sb[np.arange(r), np.arange(r)] = (0.5 * (up - down))[:r]
    for U in _rotations(q, seed):
        A = U @ Sa @ Uw.T
        if _invertible_plus_identity(A):
            return A, U @ Sb @ Vw.T
    raise SeedingError(f"no rotation avoiding eigenvalue -1 after {MAX_REDRAWS} draws")


def linear_from_weight(W, seed=0):
    """Free ``(X, Y)`` whose Cayley factors satisfy ``2 A^T B = W``.

    Raises:
        DomainError: ``||W|| > 1`` beyond a 1e-10 tolerance.
        SeedingError: no admissible orthogonal rotation within the redraw budget.
    """
    A, B = linear_factors(W, seed)
    return inverse_cayley(A, B)


def _psd_cholesky(S, k):
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    if vals.min() < -FACTOR_TOL:
        raise InfeasibleError(f"layer {k}: I - B B^T is indefinite (min eig {vals.min():.3e})")
    clipped = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    try:
        return np.linalg.cholesky(clipped)
    except np.linalg.LinAlgError:
        # semidefinite: fall back to the symmetric square root, still a valid factor
        return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def params_from_lmi(W, Lambda, gamma, seed=0, activation="relu", biases=None):
    """Free parameters reproducing LMI-feasible weights ``W`` with multipliers ``Lambda``.

    ``Psi_k = Lambda_k^{1/2}`` and, recursively,
    ``B_k = Psi_k W_k Psi_{k-1}^{-1} (A_{k-1}^T)^+ / 2``,
    ``A_k = chol(I - B_k B_k^T) Q_k``.

    Raises:
        InfeasibleError: ``(W, Lambda, gamma)`` fails the certificate.
    """
    W = [np.atleast_2d(np.asarray(Wk, dtype=float)) for Wk in W]
    H = assemble_H(W, Lambda, gamma)
    lam_min = min_eig_sym(H)
    if lam_min < -PSD_TOL:
        raise InfeasibleError(f"LMI not satisfied: min eig {lam_min:.3e}")
    L = len(W) - 1
    widths = [W[0].shape[1]] + [Wk.shape[0] for Wk in W]
    psis = [np.full(widths[0], np.sqrt(gamma / 2.0))]
    psis += [np.sqrt(np.asarray(lam, dtype=float).reshape(-1)) for lam in Lambda]
    psis.append(np.full(widths[-1], np.sqrt(2.0 / gamma)))
    if biases is None:
        biases = [np.zeros(n) for n in widths[1:]]

    layers = []
    A_prev = np.eye(widths[0])
    for k in range(L + 1):
        m = widths[k + 1]
        if not np.any(A_prev):
            A_prev = np.eye(A_prev.shape[0])
        Bk = 0.5 * (psis[k + 1][:, None] * W[k]) / psis[k][None, :] @ pinv(A_prev.T)
        chol = _psd_cholesky(np.eye(m) - Bk @ Bk.T, k)
        for Q in _rotations(m, [seed, k]):
            Ak = chol @ Q
            if _invertible_plus_identity(Ak):
                break
        else:
            raise SeedingError(f"layer {k}: no rotation avoiding eigenvalue -1 after {MAX_REDRAWS} draws")
        X, Y = inverse_cayley(Ak, Bk)
        layers.append(
            LayerParams(
                X=X, Y=Y, b=np.asarray(biases[k], dtype=float).copy(),
                g=float(np.linalg.norm(X)), h=float(np.linalg.norm(Y)),
                d=np.log(psis[k + 1]) if k < L else None,
            )
        )
        A_prev = Ak
    return DirectParams(gamma=float(gamma), layers=layers, activation=activation)
