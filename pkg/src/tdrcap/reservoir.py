"""Ground-truth time-delay reservoir simulation.

Discrete reservoirs follow the layer recursion

    x_i(t) = e^{-xi} x_{i-1}(t) + (1 - e^{-xi}) f(x_i(t-1), (C z(t))_i),
    x_0(t) = x_N(t-1),  xi = log(1 + d),

and continuous reservoirs integrate  x'(s) = -x(s) + f(x(s - tau), I(s))
with a fixed-step Euler scheme, sampling neuron i of layer t at
s = t tau - (N - i) d.  State matrices are N x T with one column per input
time step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import DivergenceError, InvalidArgumentError
from .kernels import Equilibrium, Kernel

DEFAULT_WASHOUT = 200
DEFAULT_OVERSAMPLE = 32


@dataclass(frozen=True, eq=False)
class ReservoirConfig:
    N: int
    d: float
    kernel: Kernel
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        mask = np.array(self.mask, dtype=float, ndmin=2)
        if mask.shape[0] != self.N and mask.shape == (1, self.N):
            mask = mask.T
        if self.N < 1:
            raise InvalidArgumentError("N must be >= 1")
        if not self.d > 0:
            raise InvalidArgumentError(f"neuron separation must be positive, got {self.d}")
        if mask.shape[0] != self.N:
            raise InvalidArgumentError(f"mask has {mask.shape[0]} rows, expected N={self.N}")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @property
    def n_inputs(self) -> int:
        return self.mask.shape[1]

    @property
    def xi(self) -> float:
        return math.log1p(self.d)

    @property
    def tau(self) -> float:
        return self.N * self.d

    @property
    def decay(self) -> float:
        """e^{-xi} = 1 / (1 + d)."""
        return 1.0 / (1.0 + self.d)


@dataclass(frozen=True, eq=False)
class ParallelConfig:
    reservoirs: tuple[ReservoirConfig, ...]

    def __post_init__(self):
        res = tuple(self.reservoirs)
        if not res:
            raise InvalidArgumentError("a parallel pool needs at least one reservoir")
        n = {r.n_inputs for r in res}
        if len(n) != 1:
            raise InvalidArgumentError(f"masks disagree on the input dimension: {sorted(n)}")
        object.__setattr__(self, "reservoirs", res)

    @classmethod
    def of(cls, cfg) -> ParallelConfig:
        if isinstance(cfg, ParallelConfig):
            return cfg
        if isinstance(cfg, ReservoirConfig):
            return cls((cfg,))
        return cls(tuple(cfg))

    def __len__(self):
        return len(self.reservoirs)

    def __iter__(self):
        return iter(self.reservoirs)

    @property
    def sizes(self) -> list[int]:
        return [r.N for r in self.reservoirs]

    @property
    def N_total(self) -> int:
        return sum(self.sizes)

    @property
    def n_inputs(self) -> int:
        return self.reservoirs[0].n_inputs

    def blocks(self) -> list[slice]:
        out, start = [], 0
        for size in self.sizes:
            out.append(slice(start, start + size))
            start += size
        return out


@dataclass(frozen=True, eq=False)
class InputSpec:
    """IID zero-mean Gaussian input with covariance ``cov``."""

    cov: np.ndarray

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float, ndmin=2)
        if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T):
            raise InvalidArgumentError("input covariance must be square and symmetric")
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.cov.shape[0]


def _cov_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    # semi-definite covariances (e.g. all zeros) have no Cholesky factor
    w, V = np.linalg.eigh(cov)
    scale = max(np.abs(cov).max(), 1e-300)
    if w.min() < -1e-10 * scale:
        raise InvalidArgumentError("input covariance is not positive semi-definite")
    return V * np.sqrt(np.clip(w, 0.0, None))


def gen_input(spec: InputSpec, T: int, seed=None) -> np.ndarray:
    """n x T matrix of IID N(0, cov) draws; deterministic for a given seed."""
    if T < 1:
        raise InvalidArgumentError("T must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    factor = _cov_factor(spec.cov)
    return factor @ rng.standard_normal((spec.n, T))


def _initial_layer(N: int, equilibrium, x_init) -> np.ndarray:
    if x_init is not None:
        x = np.array(x_init, dtype=float).reshape(-1)
        if x.size == 1:
            x = np.full(N, x[0])
        if x.size != N:
            raise InvalidArgumentError(f"initial layer has length {x.size}, expected {N}")
        return x
    if equilibrium is None:
        return np.zeros(N)
    x0 = equilibrium.x0 if isinstance(equilibrium, Equilibrium) else float(equilibrium)
    return np.full(N, x0)


def _check_inputs(cfg: ReservoirConfig, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(1, -1)
    if Z.shape[0] != cfg.n_inputs:
        raise InvalidArgumentError(
            f"input has dimension {Z.shape[0]}, mask expects {cfg.n_inputs}"
        )
    return Z


def _finish(X: np.ndarray, washout: int) -> np.ndarray:
    bad = ~np.isfinite(X).all(axis=0)
    if bad.any():
        t = int(np.argmax(bad))
        raise DivergenceError(f"reservoir state became non-finite at t={t}", t=t)
    return X[:, washout:]


def reservoir_map(cfg: ReservoirConfig, x_prev, I) -> np.ndarray:
    """One application of the discrete reservoir map F(x(t-1), I(t))."""
    a = cfg.decay
    drive = (1.0 - a) * cfg.kernel(np.asarray(x_prev, dtype=float), I)
    x = np.empty(cfg.N)
    left = x_prev[-1]
    for i in range(cfg.N):
        left = a * left + drive[i]
        x[i] = left
    return x


def run_discrete(cfg: ReservoirConfig, Z, washout: int = DEFAULT_WASHOUT, *,
                 equilibrium=None, x_init=None) -> np.ndarray:
    """Simulate the discrete-time reservoir driven by the columns of ``Z``.

    The initial layer x(0) (the layer preceding the first input) is x0 * ones
    when ``equilibrium`` is given, ``x_init`` when given, zeros otherwise.
    Returns the N x (T - washout) state matrix.
    """
    Z = _check_inputs(cfg, Z)
    T = Z.shape[1]
    if not 0 <= washout < T:
        raise InvalidArgumentError(f"washout {washout} must lie in [0, T={T})")
    N, a = cfg.N, cfg.decay
    # within a layer the recursion is linear once the kernel drive is known:
    # x(t) = a^i x_N(t-1) + sum_{j<=i} a^{i-j} drive_j
    powers = a ** np.arange(1, N + 1)
    lags = np.subtract.outer(np.arange(N), np.arange(N))
    prop = np.where(lags >= 0, a ** np.clip(lags, 0, None), 0.0) * (1.0 - a)
    I = cfg.mask @ Z
    X = np.empty((N, T))
    x = _initial_layer(N, equilibrium, x_init)
    f = cfg.kernel
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            x = powers * x[-1] + prop @ f(x, I[:, t])
            X[:, t] = x
            if not np.isfinite(x[-1]):
                X[:, t + 1:] = np.nan
                break
    return _finish(X, washout)


def run_continuous(cfg: ReservoirConfig, Z, oversample: int = DEFAULT_OVERSAMPLE,
                   washout: int = DEFAULT_WASHOUT, *, equilibrium=None,
                   x_init=None) -> np.ndarray:
    """Euler integration of the delay equation with step d / oversample.

    Neuron i of layer t receives the forcing (C z(t))_i on the half-open
    interval (t tau - (N - i + 1) d, t tau - (N - i) d].  The history buffer
    over one delay period starts constant at x0 (``equilibrium``), at the
    scalar ``x_init``, or at zero.
    """
    if oversample < 2:
        raise InvalidArgumentError("oversample must be >= 2")
    Z = _check_inputs(cfg, Z)
    T = Z.shape[1]
    if not 0 <= washout < T:
        raise InvalidArgumentError(f"washout {washout} must lie in [0, T={T})")
    N, M = cfg.N, int(oversample)
    h = cfg.d / M
    K = N * M
    if x_init is not None and np.size(x_init) != 1:
        raise InvalidArgumentError("continuous history takes a scalar initial value")
    start_value = _initial_layer(1, equilibrium, x_init)[0]
    # samples of the previous delay period at grid points 0..K (0 = its left end)
    hist = np.full(K + 1, start_value)
    I = np.repeat(cfg.mask @ Z, M, axis=0)
    sample_at = np.arange(1, N + 1) * M
    X = np.empty((N, T))
    den = [1.0, -(1.0 - h)]
    f = cfg.kernel
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            drive = h * f(hist[:K], I[:, t])
            start = hist[K]
            path, _ = lfilter([1.0], den, drive, zi=[(1.0 - h) * start])
            hist = np.concatenate(([start], path))
            X[:, t] = hist[sample_at]
            if not np.isfinite(start):
                X[:, t:] = np.nan
                break
    return _finish(X, washout)


def run_parallel(pcfg, Z, washout: int = DEFAULT_WASHOUT, *,
                 equilibria: Sequence | None = None, continuous: bool = False,
                 oversample: int = DEFAULT_OVERSAMPLE) -> np.ndarray:
    """Run every reservoir of the pool on the shared input; stack the states."""
    pcfg = ParallelConfig.of(pcfg)
    if equilibria is None:
        equilibria = [None] * len(pcfg)
    if len(equilibria) != len(pcfg):
        raise InvalidArgumentError("one equilibrium per reservoir is required")
    blocks = []
    for cfg, eq in zip(pcfg, equilibria):
        if continuous:
            blocks.append(run_continuous(cfg, Z, oversample, washout, equilibrium=eq))
        else:
            blocks.append(run_discrete(cfg, Z, washout, equilibrium=eq))
    return np.vstack(blocks)
