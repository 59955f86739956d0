"""Approximating VAR(1) model of single and parallel time-delay reservoirs.

Around a stable equilibrium layer x0 * ones the reservoir map is linearized
in the state and Taylor-expanded to order R in the forcing:

    X(t) = F(X0, 0) + A (X(t-1) - X0) + eps(t),

where A is block-diagonal over the pool and each innovation component is a
polynomial in the current input z(t).  Innovations are stored as a
coefficient matrix over a fixed monomial basis of degrees 1..R, which turns
every moment computation into a small matrix product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import InstabilityError, InvalidArgumentError
from .kernels import Equilibrium, select_equilibrium
from .linalg.moments import check_order
from .linalg.polynomial import MultiIndexPolynomial, add_exponents, monomial_basis
from .linalg.stein import spectral_radius, stein_solve
from .reservoir import ParallelConfig, ReservoirConfig, reservoir_map

DEFAULT_R = 3
PSI_RTOL = 1e-12
PSI_CAP = 10_000


def connectivity_matrix(cfg: ReservoirConfig, x0: float) -> np.ndarray:
    """State Jacobian of the reservoir map at the equilibrium layer x0 * ones."""
    N, a = cfg.N, cfg.decay
    phi = (1.0 - a) * cfg.kernel.state_derivative(x0)
    lags = np.subtract.outer(np.arange(N), np.arange(N))
    A = np.where(lags >= 0, phi * a ** np.clip(lags, 0, None), 0.0)
    A[:, -1] += a ** np.arange(1, N + 1)
    return A


def _mask_monomials(mask: np.ndarray, basis) -> np.ndarray:
    """prod_s C_js^{k_s} / k_s! for every neuron j and basis exponent k."""
    N, n = mask.shape
    out = np.ones((N, len(basis)))
    for b, k in enumerate(basis):
        for s, e in enumerate(k):
            if e:
                out[:, b] *= mask[:, s] ** e / math.factorial(e)
    return out


def _vr_coefficients(cfg: ReservoirConfig, x0: float, R: int, basis) -> np.ndarray:
    """Row r holds the coefficients of V_R for neuron r over ``basis``."""
    derivs = cfg.kernel.input_derivatives(x0, R)
    degree = np.array([sum(k) for k in basis])
    per_neuron = _mask_monomials(cfg.mask, basis) * derivs[degree - 1]
    a = cfg.decay
    lags = np.subtract.outer(np.arange(cfg.N), np.arange(cfg.N))
    accumulate = np.where(lags >= 0, a ** np.clip(lags, 0, None), 0.0)
    return accumulate @ per_neuron


def vr_polynomial(cfg: ReservoirConfig, x0: float, r: int, R: int) -> MultiIndexPolynomial:
    """V_R for neuron r (1-based); the innovation is (1 - e^{-xi}) V_R."""
    if not 1 <= r <= cfg.N:
        raise InvalidArgumentError(f"neuron index {r} outside 1..{cfg.N}")
    n = cfg.n_inputs
    if R == 0:
        return MultiIndexPolynomial(n, {})
    basis = monomial_basis(n, R, 1)
    row = _vr_coefficients(cfg, x0, R, basis)[r - 1]
    return MultiIndexPolynomial(n, dict(zip(basis, row)))


@dataclass(frozen=True, eq=False)
class Innovation:
    """eps(t) = coefs @ m(z(t)), with m the monomials listed in ``basis``."""

    basis: tuple[tuple[int, ...], ...]
    coefs: np.ndarray

    @property
    def n_inputs(self) -> int:
        return len(self.basis[0]) if self.basis else 0

    def monomials(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float).reshape(self.n_inputs, -1)
        out = np.ones((len(self.basis), Z.shape[1]))
        for b, k in enumerate(self.basis):
            for s, e in enumerate(k):
                if e:
                    out[b] *= Z[s] ** e
        return out

    def sample(self, Z) -> np.ndarray:
        """Innovation draws for the input columns of ``Z``."""
        return self.coefs @ self.monomials(Z)

    def polynomial(self, u: int) -> MultiIndexPolynomial:
        """Innovation component u (0-based) as a polynomial in z."""
        return MultiIndexPolynomial(self.n_inputs, dict(zip(self.basis, self.coefs[u])))

    def moment_vector(self, provider, extra=None) -> np.ndarray:
        """E[eps_u * z^extra] for every component u."""
        extra = extra or (0,) * self.n_inputs
        m = np.array([provider.moment(add_exponents(k, extra)) for k in self.basis])
        return self.coefs @ m


def innovation(pcfg, equilibria: Sequence[float], R: int) -> Innovation:
    pcfg = ParallelConfig.of(pcfg)
    basis = tuple(monomial_basis(pcfg.n_inputs, R, 1))
    rows = [
        (1.0 - cfg.decay) * _vr_coefficients(cfg, x0, R, basis)
        for cfg, x0 in zip(pcfg, equilibria)
    ]
    return Innovation(basis, np.vstack(rows))


def _basis_moments(basis, provider) -> tuple[np.ndarray, np.ndarray]:
    mean = np.array([provider.moment(k) for k in basis])
    gram = np.empty((len(basis), len(basis)))
    for i, ki in enumerate(basis):
        for j in range(i, len(basis)):
            gram[i, j] = gram[j, i] = provider.moment(add_exponents(ki, basis[j]))
    return mean, gram


def eps_moments(pcfg, equilibria, R: int, provider) -> tuple[np.ndarray, np.ndarray]:
    """Innovation mean and covariance (all pool blocks, cross blocks included)."""
    pcfg = ParallelConfig.of(pcfg)
    check_order(provider, 2 * R)
    x0s = _equilibrium_values(pcfg, equilibria)
    inn = innovation(pcfg, x0s, R)
    return _innovation_moments(inn, provider)


def _innovation_moments(inn: Innovation, provider):
    if not inn.basis:
        size = inn.coefs.shape[0]
        return np.zeros(size), np.zeros((size, size))
    mean, gram = _basis_moments(inn.basis, provider)
    mu = inn.coefs @ mean
    sigma = inn.coefs @ (gram - np.outer(mean, mean)) @ inn.coefs.T
    return mu, 0.5 * (sigma + sigma.T)


def _equilibrium_values(pcfg: ParallelConfig, equilibria) -> list[float]:
    if equilibria is None:
        return [select_equilibrium(cfg.kernel).x0 for cfg in pcfg]
    if len(equilibria) != len(pcfg):
        raise InvalidArgumentError(
            f"{len(equilibria)} equilibria given for a pool of {len(pcfg)} reservoirs"
        )
    return [e.x0 if isinstance(e, Equilibrium) else float(e) for e in equilibria]


@dataclass(frozen=True, eq=False)
class ModelMoments:
    """Everything needed to evaluate capacities in closed form.

    ``psi`` lists the MA coefficients A^j up to the truncation horizon, i.e.
    until ||A^j||_F < 1e-12 ||Gamma(0)||_F (cap 10^4 terms).
    """

    A: np.ndarray
    mu_eps: np.ndarray
    sigma_eps: np.ndarray
    mu_x: np.ndarray
    gamma0: np.ndarray
    R: int
    equilibria: tuple[float, ...]
    sizes: tuple[int, ...]
    innovation: Innovation = field(repr=False)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    def gamma(self, k: int) -> np.ndarray:
        """Autocovariance at lag k (Gamma(-k) = Gamma(k)^T)."""
        if k < 0:
            return self.gamma(-k).T
        return np.linalg.matrix_power(self.A, k) @ self.gamma0

    @cached_property
    def psi_horizon(self) -> int:
        """Index of the first MA coefficient dropped by the truncation rule."""
        tol = PSI_RTOL * np.linalg.norm(self.gamma0)
        P = np.eye(self.N)
        for j in range(PSI_CAP):
            if np.linalg.norm(P) < tol or not P.any():
                return j
            P = self.A @ P
        return PSI_CAP

    def psi_terms(self, k_max: int) -> list[np.ndarray]:
        """Psi_0..Psi_k_max with terms beyond the horizon set to zero."""
        tol = PSI_RTOL * np.linalg.norm(self.gamma0)
        out, P, dropped = [], np.eye(self.N), False
        for j in range(k_max + 1):
            # same rule as psi_horizon, evaluated only as far as needed
            dropped = dropped or j >= PSI_CAP or np.linalg.norm(P) < tol or not P.any()
            out.append(np.zeros_like(P) if dropped else P)
            P = self.A @ P
        return out

    @property
    def psi(self) -> list[np.ndarray]:
        return self.psi_terms(self.psi_horizon - 1) if self.psi_horizon else []


def model_moments(pcfg, equilibria=None, R: int = DEFAULT_R, provider=None) -> ModelMoments:
    """Build the VAR(1) approximation of a single reservoir or a pool.

    ``equilibria`` holds one x0 per reservoir; by default the largest stable
    equilibrium of each kernel is used.
    """
    if provider is None:
        raise InvalidArgumentError("a moment provider is required")
    pcfg = ParallelConfig.of(pcfg)
    if R < 0:
        raise InvalidArgumentError("R must be non-negative")
    check_order(provider, 2 * R)
    x0s = _equilibrium_values(pcfg, equilibria)

    blocks, drift = [], []
    for idx, (cfg, x0) in enumerate(zip(pcfg, x0s)):
        slope = cfg.kernel.state_derivative(x0)
        if not abs(slope) < 1.0:
            raise InstabilityError(
                f"reservoir {idx}: |df/dx(x0={x0:.6g})| = {abs(slope):.6g} >= 1", index=idx
            )
        A_j = connectivity_matrix(cfg, x0)
        rho = spectral_radius(A_j)
        if rho >= 1.0:
            raise InstabilityError(f"reservoir {idx}: spectral radius {rho:.6g} >= 1", index=idx)
        layer = np.full(cfg.N, x0)
        # evaluated, not assumed: F(x0, 0) equals x0 only at a true fixed point
        drift.append(reservoir_map(cfg, layer, np.zeros(cfg.N)) - A_j @ layer)
        blocks.append(A_j)

    A = block_diag(*blocks)
    inn = innovation(pcfg, x0s, R)
    mu_eps, sigma_eps = _innovation_moments(inn, provider)
    rhs = np.concatenate(drift) + mu_eps
    mu_x = np.empty(pcfg.N_total)
    for sl, A_j in zip(pcfg.blocks(), blocks):
        mu_x[sl] = np.linalg.solve(np.eye(A_j.shape[0]) - A_j, rhs[sl])
    gamma0 = stein_solve(A, sigma_eps)
    return ModelMoments(
        A=A,
        mu_eps=mu_eps,
        sigma_eps=sigma_eps,
        mu_x=mu_x,
        gamma0=gamma0,
        R=R,
        equilibria=tuple(x0s),
        sizes=tuple(pcfg.sizes),
        innovation=inn,
    )


def simulate_var(model: ModelMoments, Z, washout: int = 0, x_init=None) -> np.ndarray:
    """Run the VAR(1) recursion with innovations evaluated on the inputs ``Z``."""
    eps = model.innovation.sample(Z)
    T = eps.shape[1]
    x = model.mu_x.copy() if x_init is None else np.asarray(x_init, dtype=float)
    X = np.empty((model.N, T))
    drift = model.mu_x - model.A @ model.mu_x - model.mu_eps
    for t in range(T):
        x = drift + model.A @ x + eps[:, t]
        X[:, t] = x
    return X[:, washout:]
