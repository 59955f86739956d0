"""Solvers for the discrete Stein (Lyapunov) equation G = A G A^T + S."""

from __future__ import annotations

import numpy as np

from ..errors import InstabilityError, InvalidArgumentError, NumericalError
from .vech import duplication_matrix, elimination_matrix, unvech, vech_op

# Largest order for which the vech-Kronecker system is still small enough
# to assemble densely (vech size 1830).
KRON_MAX_DIM = 60


def spectral_radius(A) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def _check(A, S):
    A = np.asarray(A, dtype=float)
    S = np.asarray(S, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if S.ndim == 0:
        S = S.reshape(1, 1)
    m = A.shape[0]
    if A.shape != (m, m) or S.shape != (m, m):
        raise InvalidArgumentError(f"shape mismatch: A {A.shape}, S {S.shape}")
    if not np.allclose(S, S.T, rtol=1e-10, atol=1e-300):
        raise InvalidArgumentError("S must be symmetric")
    rho = spectral_radius(A)
    if rho >= 1.0:
        raise InstabilityError(f"spectral radius {rho:.6g} >= 1; no stationary solution")
    return A, S


def stein_solve_kron(A, S) -> np.ndarray:
    """Solve through vech(G) = (I - L (A kron A) D)^{-1} vech(S)."""
    A, S = _check(A, S)
    m = A.shape[0]
    L = elimination_matrix(m)
    D = duplication_matrix(m)
    system = np.eye(L.shape[0]) - L @ np.kron(A, A) @ D
    return unvech(np.linalg.solve(system, vech_op(0.5 * (S + S.T))), m)


def stein_solve(A, S, *, rtol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """Stationary covariance G with G = A G A^T + S.

    Uses the doubling recursion G <- G + A_k G A_k^T, A_{k+1} = A_k^2, which
    sums 2^k terms of the MA series after k sweeps.  If it has not reached
    ``rtol`` after ``max_iter`` sweeps the dense vech-Kronecker system is
    solved instead (orders up to ``KRON_MAX_DIM`` only).
    """
    A, S = _check(A, S)
    G = 0.5 * (S + S.T)
    Ak = A.copy()
    for _ in range(max_iter):
        incr = Ak @ G @ Ak.T
        G = G + incr
        scale = np.linalg.norm(G)
        if np.linalg.norm(incr) <= rtol * scale or scale == 0.0:
            return 0.5 * (G + G.T)
        Ak = Ak @ Ak
    if A.shape[0] <= KRON_MAX_DIM:
        return stein_solve_kron(A, S)
    raise NumericalError(f"doubling iteration did not converge in {max_iter} sweeps")
