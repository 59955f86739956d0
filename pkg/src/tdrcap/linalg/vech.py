"""vec/vech operators, duplication and elimination matrices, vech index maps.

vech stacks the lower triangle column by column:
``vech(A) = (A11, ..., An1, A22, ..., An2, ..., Ann)``.  The public index
maps ``sigma_index`` / ``sigma_inverse`` are 1-based; everything else in the
package works with the 0-based arrays returned by :func:`vech_indices`.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import InvalidArgumentError


def vech_size(n: int) -> int:
    return n * (n + 1) // 2


def vech_dim(size: int) -> int:
    """Inverse of :func:`vech_size`; raises if ``size`` is not triangular."""
    n = int(round((np.sqrt(8 * size + 1) - 1) / 2))
    if vech_size(n) != size:
        raise InvalidArgumentError(f"{size} is not a triangular number")
    return n


@lru_cache(maxsize=64)
def _vech_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    # triu_indices walks the upper triangle row by row; reading it transposed
    # walks the lower triangle column by column.
    cols, rows = np.triu_indices(n)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def vech_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based (row, col) arrays listing the entries of ``vech`` in order."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    return _vech_indices(int(n))


def vec_op(A) -> np.ndarray:
    """Stack the columns of ``A`` into one vector."""
    A = np.asarray(A)
    if A.ndim != 2:
        raise InvalidArgumentError(f"vec expects a matrix, got ndim={A.ndim}")
    return A.reshape(-1, order="F")


def _check_symmetric(A: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {A.shape}")
    if A.dtype != object and not np.allclose(A, A.T, rtol=1e-10, atol=1e-14):
        raise InvalidArgumentError("matrix is not symmetric")


def vech_op(A) -> np.ndarray:
    """Half-vectorization of a symmetric matrix."""
    A = np.asarray(A)
    _check_symmetric(A)
    rows, cols = vech_indices(A.shape[0])
    return A[rows, cols]


def unvech(v, n: int | None = None) -> np.ndarray:
    """Rebuild the symmetric matrix whose vech is ``v``."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise InvalidArgumentError("unvech expects a vector")
    if n is None:
        n = vech_dim(v.size)
    elif vech_size(n) != v.size:
        raise InvalidArgumentError(
            f"vector of length {v.size} cannot be unvech'd into {n}x{n}"
        )
    rows, cols = vech_indices(n)
    A = np.zeros((n, n), dtype=v.dtype)
    A[rows, cols] = v
    A[cols, rows] = v
    return A


@lru_cache(maxsize=32)
def _duplication(n: int) -> np.ndarray:
    rows, cols = vech_indices(n)
    D = np.zeros((n * n, vech_size(n)))
    for k, (i, j) in enumerate(zip(rows, cols)):
        D[i + j * n, k] = 1.0
        D[j + i * n, k] = 1.0
    D.setflags(write=False)
    return D


def duplication_matrix(n: int) -> np.ndarray:
    """D_n with vec(A) = D_n vech(A) for symmetric A."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    return _duplication(int(n)).copy()


def elimination_matrix(n: int) -> np.ndarray:
    """L_n with vech(A) = L_n vec(A)."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    rows, cols = vech_indices(n)
    L = np.zeros((vech_size(n), n * n))
    L[np.arange(rows.size), rows + cols * n] = 1.0
    return L


def sigma_index(i: int, j: int, n: int) -> int:
    """1-based position of entry (i, j), i >= j, inside vech of an n x n matrix."""
    if not (1 <= j <= i <= n):
        raise InvalidArgumentError(f"need 1 <= j <= i <= n, got i={i}, j={j}, n={n}")
    return (j - 1) * n - (j - 1) * (j - 2) // 2 + (i - j) + 1


def sigma_inverse(k: int, n: int) -> tuple[int, int]:
    """Inverse of :func:`sigma_index`: 1-based (i, j) for vech slot k."""
    if not (1 <= k <= vech_size(n)):
        raise InvalidArgumentError(f"slot {k} out of range for n={n}")
    rows, cols = vech_indices(n)
    return int(rows[k - 1]) + 1, int(cols[k - 1]) + 1
