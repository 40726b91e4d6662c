"""Dense real/complex linear algebra and FFT primitives.

Matrices are plain ``numpy.ndarray`` objects in double precision. The
factorizations delegate to LAPACK through numpy/scipy; power iteration and
the Fourier convention are implemented here because the rest of the package
depends on their exact semantics.
"""

import warnings

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .exceptions import ConvergenceError, DimensionError, SingularMatrixError

SINGULAR_PIVOT_TOL = 1e-12
PINV_RANK_TOL = 1e-10


def as_matrix(M, dtype=np.float64, name="matrix"):
    M = np.asarray(M, dtype=dtype)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _as_any_matrix(M, name="matrix"):
    M = np.asarray(M)
    dtype = np.complex128 if np.iscomplexobj(M) else np.float64
    return as_matrix(M, dtype=dtype, name=name)


POWER_BLOCK = 8


def _power_iteration(M, tol, max_iters, rng):
    """Block power iteration on ``M^* M`` with Rayleigh-Ritz extraction.

    A block of ``min(n, 8)`` vectors converges at rate
    ``(sigma_{k+1} / sigma_1)^2`` rather than ``(sigma_2 / sigma_1)^2``, which
    matters for operators with clustered top singular values (paired
    frequency bins of a convolution, for instance).
    """
    n = M.shape[1]
    k = min(n, POWER_BLOCK)
    V = rng.standard_normal((n, k))
    if np.iscomplexobj(M):
        V = V + 1j * rng.standard_normal((n, k))
    V = np.linalg.qr(V)[0]
    rho = 0.0
    for _ in range(max_iters):
        W = M.conj().T @ (M @ V)
        H = V.conj().T @ W
        theta, S = np.linalg.eigh(0.5 * (H + H.conj().T))
        rho = float(theta[-1])
        if rho <= 0.0:
            return 0.0, True
        v, w = V @ S[:, -1], W @ S[:, -1]
        # A residual-small Rayleigh quotient is within tol of an eigenvalue of M*M.
        if np.linalg.norm(w - rho * v) <= tol * rho:
            return np.sqrt(rho), True
        V = np.linalg.qr(W @ S[:, ::-1])[0]
    return np.sqrt(max(rho, 0.0)), False


def spectral_norm(M, tol=1e-9, max_iters=20000, seed=0):
    """Largest singular value of ``M`` by (block) power iteration on ``M^T M``.

    A second chain with a different seed is started if the first one does not
    stabilize within ``max_iters``.

    Raises:
        ConvergenceError: neither chain converged; ``last_value`` holds the
            final estimate.
    """
    M = _as_any_matrix(M)
    if M.size == 0:
        raise DimensionError("spectral_norm of an empty matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.any(M):
        return 0.0
    sigma = 0.0
    for attempt in range(2):
        rng = np.random.default_rng([seed, attempt])
        sigma, ok = _power_iteration(M, tol, max_iters, rng)
        if ok:
            return float(sigma)
    raise ConvergenceError(
        f"power iteration did not converge in {max_iters} iterations",
        last_value=float(sigma),
    )


def svd(M):
    """Full SVD ``M = U diag(S) V^T`` with non-increasing singular values."""
    M = _as_any_matrix(M)
    if M.size == 0:
        raise DimensionError("svd of an empty matrix")
    U, S, Vh = np.linalg.svd(M, full_matrices=True)
    return U, S, Vh.conj().T


def sigma_max(M):
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def min_eig_sym(S):
    """Smallest eigenvalue of the symmetric part of ``S``."""
    S = _as_any_matrix(S)
    if S.shape[0] != S.shape[1]:
        raise DimensionError(f"min_eig_sym needs a square matrix, got {S.shape}")
    if S.size == 0:
        raise DimensionError("min_eig_sym of an empty matrix")
    S = 0.5 * (S + S.conj().T)
    return float(np.linalg.eigvalsh(S)[0])


def solve(A, B):
    """Solve ``A X = B`` by LU with partial pivoting.

    Raises:
        SingularMatrixError: a pivot falls below ``1e-12 * ||A||``.
    """
    A = _as_any_matrix(A, "A")
    B = np.asarray(B)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"A must be square, got {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise DimensionError(f"B has {B.shape[0]} rows, A has {A.shape[0]}")
    with warnings.catch_warnings():
        # exact singularity is reported through SingularMatrixError below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    if np.abs(np.diag(lu)).min() < SINGULAR_PIVOT_TOL * scale:
        raise SingularMatrixError("matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), B, check_finite=False)


def lu_rcond(A):
    """Reciprocal 1-norm condition estimate from the LU factors of ``A``."""
    A = _as_any_matrix(A)
    getrf, gecon = lapack.get_lapack_funcs(("getrf", "gecon"), (A,))
    lu, _, info = getrf(A)
    if info > 0:
        return 0.0
    anorm = np.abs(A).sum(axis=0).max()
    if anorm == 0:
        return 0.0
    rcond, _ = gecon(lu, anorm, norm="1")
    return float(rcond)


def pinv(M, rank_tol=PINV_RANK_TOL):
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below ``rank_tol * sigma_max`` are treated as zero.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    M = _as_any_matrix(M)
    if M.size == 0:
        return np.zeros((M.shape[1], M.shape[0]), dtype=M.dtype)
    U, S, Vh = np.linalg.svd(M, full_matrices=False)
    if S[0] == 0:
        return np.zeros((M.shape[1], M.shape[0]), dtype=M.dtype)
    keep = S > rank_tol * S[0]
    Sinv = np.where(keep, 1.0 / np.where(keep, S, 1.0), 0.0)
    return (Vh.conj().T * Sinv) @ U.conj().T


def _check_square_spatial(t):
    t = np.asarray(t)
    if t.ndim < 2 or t.shape[-1] != t.shape[-2]:
        raise DimensionError(f"spatial dims must be s x s, got shape {t.shape}")
    if t.shape[-1] < 1:
        raise DimensionError("spatial size must be >= 1")
    return t


def fft2_batch(t):
    """2-D DFT over the trailing two axes: ``x -> F x F^*``.

    ``F[i, j] = exp(-2 pi i i j / s) / s``; the leading axes are batch axes.
    """
    t = _check_square_spatial(t)
    s = t.shape[-1]
    return np.fft.fft(np.fft.ifft(t, axis=-1), axis=-2) / s


def ifft2_batch(t):
    """Exact inverse of :func:`fft2_batch`."""
    t = _check_square_spatial(t)
    s = t.shape[-1]
    return np.fft.fft(np.fft.ifft(t, axis=-2), axis=-1) * s


def random_orthogonal(n, seed):
    """Seeded Haar-distributed orthogonal matrix (QR with sign-fixed R)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs
