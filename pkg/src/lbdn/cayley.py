"""Cayley transforms producing factor pairs with ``A A^* + B B^* = I``."""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, DomainError, NonInvertibleTransformError, SingularMatrixError
from .numerics import as_matrix, lu_rcond, solve

RCOND_TOL = 1e-10


@dataclass(frozen=True)
class CayleyFactors:
    """Factor pair ``(A, B)``, ``A`` is m x m and ``B`` is m x n."""

    A: np.ndarray
    B: np.ndarray

    def residual(self):
        """Frobenius norm of ``A A^* + B B^* - I``."""
        m = self.A.shape[0]
        G = self.A @ self.A.conj().T + self.B @ self.B.conj().T
        return float(np.linalg.norm(G - np.eye(m)))


def _cayley(X, Y, dtype):
    X = as_matrix(X, dtype, "X")
    Y = as_matrix(Y, dtype, "Y")
    m = X.shape[0]
    if X.shape != (m, m):
        raise DimensionError(f"X must be square, got {X.shape}")
    if Y.shape[1] != m:
        raise DimensionError(f"Y must have {m} columns, got {Y.shape}")
    I = np.eye(m, dtype=dtype)
    Z = X - X.conj().T + Y.conj().T @ Y
    M = I + Z
    if lu_rcond(M) < RCOND_TOL:
        raise SingularMatrixError("I + Z is numerically singular (conditioning failure)")
    At = solve(M, I - Z)
    # Y (I+Z)^{-1} computed as the adjoint of a solve with (I+Z)^*.
    Bt = -2.0 * solve(M.conj().T, Y.conj().T).conj().T
    return CayleyFactors(A=At.conj().T, B=Bt.conj().T)


def cayley(X, Y):
    """Real Cayley transform.

    ``Z = X - X^T + Y^T Y``, ``A^T = (I+Z)^{-1}(I-Z)``, ``B^T = -2 Y (I+Z)^{-1}``.

    Args:
        X: (m, m) free matrix; only its skew part matters.
        Y: (n, m) free matrix.

    Returns:
        CayleyFactors with ``A`` (m, m) and ``B`` (m, n).
    """
    return _cayley(X, Y, np.float64)


def cayley_complex(X, Y):
    """Complex Cayley transform, conjugate transposes in place of transposes."""
    return _cayley(X, Y, np.complex128)


def inverse_cayley(A, B):
    """Recover one ``(X, Y)`` with ``cayley(X, Y) == (A, B)``.

    Uses ``Z = (I - A^T)(I + A^T)^{-1}``, ``Y = -B^T (I + Z) / 2`` and
    ``X = tril_strict(Z - Z^T) / 2``.

    Raises:
        DomainError: ``A A^T + B B^T`` differs from ``I`` by more than 1e-8.
        NonInvertibleTransformError: ``A`` has an eigenvalue (numerically) at -1.
    """
    A = as_matrix(A, name="A")
    B = as_matrix(B, name="B")
    m = A.shape[0]
    if A.shape != (m, m) or B.shape[0] != m:
        raise DimensionError(f"incompatible shapes A {A.shape}, B {B.shape}")
    I = np.eye(m)
    G = A @ A.T + B @ B.T
    if np.linalg.norm(G - I) > 1e-8:
        raise DomainError("A A^T + B B^T must equal I")
    M = I + A.T
    if lu_rcond(M) < RCOND_TOL:
        raise NonInvertibleTransformError("A has an eigenvalue at -1")
    # (I - A^T) M^{-1} = (M^{-T} (I - A^T)^T)^T
    Z = solve(M.T, (I - A.T).T).T
    Y = -0.5 * B.T @ (I + Z)
    X = 0.5 * np.tril(Z - Z.T, k=-1)
    return X, Y
