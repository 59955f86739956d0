"""Linear and quadratic h-lag memory tasks.

Both act on the stacked input z^h(t) = (z(t), z(t-1), ..., z(t-h)), whose
slot i holds component i % n of the input at lag i // n:

    linear     y(t) = L^T z^h(t)                 L: (h+1)n x q
    quadratic  y(t) = Q vech(z^h(t) z^h(t)^T)    Q: q x (h+1)n((h+1)n+1)/2

Inputs are IID in time with zero mean, so every expectation factorizes over
distinct lags.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Union

import numpy as np

from .errors import InvalidArgumentError
from .linalg.moments import check_order, check_zero_mean
from .linalg.vech import duplication_matrix, vec_op, vech_indices, vech_size
from .model import ModelMoments, innovation
from .reservoir import ParallelConfig


@dataclass(frozen=True, eq=False)
class LinearTask:
    L: np.ndarray
    h: int

    def __post_init__(self):
        L = np.array(self.L, dtype=float)
        if L.ndim < 2:
            L = L.reshape(-1, 1)  # a vector means a scalar target
        if self.h < 0:
            raise InvalidArgumentError("h must be >= 0")
        if L.shape[0] % (self.h + 1):
            raise InvalidArgumentError(
                f"L has {L.shape[0]} rows, not a multiple of h+1={self.h + 1}"
            )
        L.setflags(write=False)
        object.__setattr__(self, "L", L)

    @property
    def n(self) -> int:
        return self.L.shape[0] // (self.h + 1)

    @property
    def q(self) -> int:
        return self.L.shape[1]

    def block(self, s: int) -> np.ndarray:
        """Rows of L acting on z(t - s)."""
        return self.L[s * self.n:(s + 1) * self.n]


@dataclass(frozen=True, eq=False)
class QuadraticTask:
    Q: np.ndarray
    h: int
    n: int

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float, ndmin=2)
        if self.h < 0 or self.n < 1:
            raise InvalidArgumentError("need h >= 0 and n >= 1")
        expected = vech_size((self.h + 1) * self.n)
        if Q.shape[1] != expected:
            raise InvalidArgumentError(
                f"Q has {Q.shape[1]} columns, expected {expected} for h={self.h}, n={self.n}"
            )
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    @property
    def q(self) -> int:
        return self.Q.shape[0]

    @property
    def slots(self) -> tuple[np.ndarray, np.ndarray]:
        """(row, col) of every vech slot in z^h z^h^T."""
        return vech_indices((self.h + 1) * self.n)


TaskSpec = Union[LinearTask, QuadraticTask]


def diag_quadratic_task(h: int, n: int, weights=None) -> QuadraticTask:
    """Q = vec(Q*)^T D with Q* block-diagonal, block s equal to w_s * ones(n, n).

    With unit weights the target is sum_s (sum_i z_i(t - s))^2.
    """
    weights = np.ones(h + 1) if weights is None else np.asarray(weights, dtype=float)
    if weights.shape != (h + 1,):
        raise InvalidArgumentError(f"expected {h + 1} lag weights, got {weights.shape}")
    Qstar = np.kron(np.diag(weights), np.ones((n, n)))
    return quadratic_from_matrix(Qstar, h, n)


def quadratic_from_matrix(Qstar, h: int, n: int) -> QuadraticTask:
    """Scalar task y = z^h^T Q* z^h for a symmetric Q*."""
    Qstar = np.asarray(Qstar, dtype=float)
    m = (h + 1) * n
    if Qstar.shape != (m, m):
        raise InvalidArgumentError(f"Q* must be {m} x {m}")
    row = vec_op(Qstar) @ duplication_matrix(m)
    return QuadraticTask(row.reshape(1, -1), h, n)


def _stacked_inputs(Z: np.ndarray, h: int, washout: int) -> np.ndarray:
    T = Z.shape[1]
    return np.vstack([Z[:, washout - s:T - s] for s in range(h + 1)])


def target_series(task: TaskSpec, Z, washout: int) -> np.ndarray:
    """Targets y(t) for t = washout..T-1, aligned with a washed-out state matrix.

    Requires washout >= h so that every lag refers to an observed input.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(1, -1)
    if Z.shape[0] != task.n:
        raise InvalidArgumentError(f"input dimension {Z.shape[0]} != task dimension {task.n}")
    T = Z.shape[1]
    if washout < task.h:
        raise InvalidArgumentError(f"washout {washout} shorter than the task lag h={task.h}")
    if T <= washout:
        raise InvalidArgumentError(f"T={T} must exceed the washout {washout}")
    Zh = _stacked_inputs(Z, task.h, washout)
    if isinstance(task, LinearTask):
        return task.L.T @ Zh
    rows, cols = task.slots
    return task.Q @ (Zh[rows] * Zh[cols])


def _slot_exponents(slot_factors, n: int) -> dict[int, tuple[int, ...]]:
    """Group (lag, var) factors into one exponent vector per lag."""
    by_lag = defaultdict(lambda: [0] * n)
    for lag, var in slot_factors:
        by_lag[lag][var] += 1
    return {lag: tuple(k) for lag, k in by_lag.items()}


def _factorized_moment(provider, factors, n: int) -> float:
    out = 1.0
    for k in _slot_exponents(factors, n).values():
        out *= provider.moment(k)
        if out == 0.0:
            break
    return out


@lru_cache(maxsize=16)
def _quadratic_moments(provider, h: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """E[vech M] and E[vech M vech M^T] for M = z^h z^h^T."""
    rows, cols = vech_indices((h + 1) * n)
    factors = [((r // n, r % n), (c // n, c % n)) for r, c in zip(rows, cols)]
    size = len(factors)
    first = np.array([_factorized_moment(provider, f, n) for f in factors])
    second = np.empty((size, size))
    for i in range(size):
        for j in range(i, size):
            second[i, j] = second[j, i] = _factorized_moment(
                provider, factors[i] + factors[j], n
            )
    first.setflags(write=False)
    second.setflags(write=False)
    return first, second


def _check_provider(task: TaskSpec, provider) -> None:
    if provider.n != task.n:
        raise InvalidArgumentError(
            f"moment provider has dimension {provider.n}, task expects {task.n}"
        )
    check_zero_mean(provider)


def _input_cov(provider, n: int) -> np.ndarray:
    cov = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            k = [0] * n
            k[i] += 1
            k[j] += 1
            cov[i, j] = provider.moment(k)
    return cov


def task_output_covariance(task: TaskSpec, provider) -> np.ndarray:
    """Cov(y(t), y(t)) as a q x q matrix; its trace normalizes the NMSE."""
    _check_provider(task, provider)
    if isinstance(task, LinearTask):
        check_order(provider, 2)
        cov_zh = np.kron(np.eye(task.h + 1), _input_cov(provider, task.n))
        return task.L.T @ cov_zh @ task.L
    check_order(provider, 4)
    first, second = _quadratic_moments(provider, task.h, task.n)
    mean_y = task.Q @ first
    cov = task.Q @ second @ task.Q.T - np.outer(mean_y, mean_y)
    return 0.5 * (cov + cov.T)


def task_output_mean(task: TaskSpec, provider) -> np.ndarray:
    if isinstance(task, LinearTask):
        return np.zeros(task.q)
    first, _ = _quadratic_moments(provider, task.h, task.n)
    return task.Q @ first


def eps_cross_moment(cfg, x0: float, R: int, u: int,
                     monomial: Mapping[int, tuple[int, ...]], provider, k: int = 0) -> float:
    """E[eps_u(t-k) * prod_l z(t-l)^{monomial[l]}] for one reservoir.

    ``u`` is a 0-based neuron index and ``monomial`` maps lags to exponent
    vectors.  Factors at lag k join the innovation polynomial; the others
    factor out as plain input moments.
    """
    pcfg = ParallelConfig.of(cfg)
    n = pcfg.n_inputs
    zero = (0,) * n
    same = tuple(monomial.get(k, zero))
    degree = sum(same)
    check_order(provider, R + degree)
    out = 1.0
    for lag, expo in monomial.items():
        if lag != k:
            out *= provider.moment(tuple(expo))
    if out == 0.0:
        return 0.0
    inn = innovation(pcfg, [x0] * len(pcfg), R)
    if not inn.basis:
        return 0.0
    return out * float(inn.moment_vector(provider, same)[u])


def _eps_input_matrix(model: ModelMoments, provider, n: int) -> np.ndarray:
    """N* x n matrix of E[eps_u z_v] (centered equals raw since E[z] = 0)."""
    out = np.zeros((model.N, n))
    if not model.innovation.basis:
        return out
    for v in range(n):
        e = [0] * n
        e[v] = 1
        out[:, v] = model.innovation.moment_vector(provider, tuple(e))
    return out


def task_cross_covariance(task: TaskSpec, model: ModelMoments, provider) -> np.ndarray:
    """Cov(X(t), y(t)) as an N* x q matrix from the MA(inf) representation.

    Only the MA terms with lag s <= h contribute: the innovation at t - s is
    independent of every input the target uses at other lags.
    """
    _check_provider(task, provider)
    n = task.n
    if model.innovation.n_inputs not in (0, n):
        raise InvalidArgumentError("model and task disagree on the input dimension")
    psi = model.psi_terms(task.h)
    if isinstance(task, LinearTask):
        check_order(provider, model.R + 1)
        M = _eps_input_matrix(model, provider, n)
        return sum(psi[s] @ M @ task.block(s) for s in range(task.h + 1))

    check_order(provider, max(2 * model.R, model.R + 2))
    rows, cols = task.slots
    # Cov(eps, z_a z_b) for same-lag products; identical for every lag
    pair = {}
    for a in range(n):
        for b in range(a, n):
            e = [0] * n
            e[a] += 1
            e[b] += 1
            e = tuple(e)
            if model.innovation.basis:
                raw = model.innovation.moment_vector(provider, e)
            else:
                raw = np.zeros(model.N)
            pair[a, b] = raw - model.mu_eps * provider.moment(e)
    out = np.zeros((model.N, task.q))
    for s in range(task.h + 1):
        B = np.zeros((model.N, task.q))
        for slot, (r, c) in enumerate(zip(rows, cols)):
            if r // n == s and c // n == s:
                a, b = sorted((r % n, c % n))
                B += np.outer(pair[a, b], task.Q[:, slot])
        out += psi[s] @ B
    return out


def task_moments(task: TaskSpec, model: ModelMoments, provider):
    """(mu_y, Cov(y, y), Cov(X, y)) for the capacity formula."""
    return (
        task_output_mean(task, provider),
        task_output_covariance(task, provider),
        task_cross_covariance(task, model, provider),
    )
