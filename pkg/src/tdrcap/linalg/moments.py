"""Hafnians and higher-order moments of the input signal.

Two moment sources are supported: zero-mean Gaussian inputs, whose moments
are hafnians of an expanded covariance matrix (Isserlis), and an explicit
table for anything else.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..errors import InvalidArgumentError, UnsupportedOrderError


def _hafnian_rec(S, idx: tuple[int, ...]):
    if not idx:
        return 1
    first, rest = idx[0], idx[1:]
    total = 0
    for pos, partner in enumerate(rest):
        weight = S[first, partner]
        if weight == 0:
            continue
        total = total + weight * _hafnian_rec(S, rest[:pos] + rest[pos + 1:])
    return total


def hafnian(S):
    """Sum over perfect matchings of products of matched entries.

    Recursive pairing of the lowest unmatched index, (2l - 1)!! terms.
    Works for float and object (e.g. ``Fraction``) arrays alike; only the
    upper triangle is read.
    """
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidArgumentError(f"hafnian needs a square matrix, got {S.shape}")
    if S.shape[0] % 2:
        raise InvalidArgumentError("hafnian of an odd-dimensional matrix is undefined")
    return _hafnian_rec(S, tuple(range(S.shape[0])))


def expanded_covariance(cov, k) -> np.ndarray:
    """Covariance of the vector repeating coordinate i exactly k_i times."""
    cov = np.asarray(cov)
    idx = np.repeat(np.arange(cov.shape[0]), np.asarray(k, dtype=int))
    return cov[np.ix_(idx, idx)]


def gaussian_moment(cov, k):
    """E[prod z_i^{k_i}] for z ~ N(0, cov)."""
    cov = np.asarray(cov)
    k = tuple(int(e) for e in k)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or len(k) != cov.shape[0]:
        raise InvalidArgumentError(
            f"exponent vector of length {len(k)} does not match covariance {cov.shape}"
        )
    if any(e < 0 for e in k):
        raise InvalidArgumentError("exponents must be non-negative")
    order = sum(k)
    if order == 0:
        return 1.0 if cov.dtype != object else 1
    if order % 2:
        return 0.0 if cov.dtype != object else 0
    return hafnian(expanded_covariance(cov, k))


class GaussianMoments:
    """Moments of a zero-mean Gaussian vector with covariance ``cov``.

    Results are memoized per exponent vector; instances are never mutated
    otherwise, so sharing one across threads is harmless.
    """

    max_order = None

    def __init__(self, cov):
        cov = np.array(cov, dtype=float, ndmin=2)
        if cov.shape[0] != cov.shape[1]:
            raise InvalidArgumentError(f"covariance must be square, got {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-300):
            raise InvalidArgumentError("covariance must be symmetric")
        scale = max(np.abs(cov).max(), 1e-300)
        if np.linalg.eigvalsh(cov).min() < -1e-10 * scale:
            raise InvalidArgumentError("covariance must be positive semi-definite")
        cov.setflags(write=False)
        self.cov = cov
        self.n = cov.shape[0]
        self._cache: dict[tuple[int, ...], float] = {}

    def moment(self, k) -> float:
        k = tuple(int(e) for e in k)
        try:
            return self._cache[k]
        except KeyError:
            pass
        value = float(gaussian_moment(self.cov, k))
        self._cache[k] = value
        return value

    def __repr__(self):
        return f"GaussianMoments(n={self.n})"


class MomentTable:
    """User-supplied moments up to ``max_order``.

    The table maps exponent tuples to E[prod z_i^{k_i}]; missing entries of
    admissible order are an error rather than silently zero.
    """

    def __init__(self, n: int, max_order: int, table: Mapping[tuple[int, ...], float]):
        self.n = int(n)
        self.max_order = int(max_order)
        self._table = {}
        for key, value in table.items():
            key = tuple(int(e) for e in key)
            if len(key) != self.n:
                raise InvalidArgumentError(f"exponent {key} has wrong length for n={n}")
            self._table[key] = float(value)
        self._table.setdefault((0,) * self.n, 1.0)

    @property
    def cov(self) -> np.ndarray:
        cov = np.empty((self.n, self.n))
        for i in range(self.n):
            for j in range(self.n):
                k = [0] * self.n
                k[i] += 1
                k[j] += 1
                cov[i, j] = self.moment(k)
        return cov

    def moment(self, k) -> float:
        k = tuple(int(e) for e in k)
        if sum(k) > self.max_order:
            raise UnsupportedOrderError(
                f"moment of order {sum(k)} requested, table holds up to {self.max_order}"
            )
        try:
            return self._table[k]
        except KeyError:
            raise InvalidArgumentError(f"moment {k} missing from table") from None


def moment(provider, k) -> float:
    return provider.moment(k)


def check_order(provider, order: int) -> None:
    """Fail early if ``provider`` cannot supply moments of ``order``."""
    if provider.max_order is not None and order > provider.max_order:
        raise UnsupportedOrderError(
            f"moments up to order {order} needed, provider covers {provider.max_order}"
        )


def check_zero_mean(provider, atol: float = 1e-14) -> None:
    for i in range(provider.n):
        k = [0] * provider.n
        k[i] = 1
        if abs(provider.moment(k)) > atol:
            raise InvalidArgumentError("input moments must describe a zero-mean signal")
