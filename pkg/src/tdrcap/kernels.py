"""Mackey-Glass and Ikeda nonlinear kernels, their derivatives and equilibria.

Both families depend on (x, I) only through u = x + gamma * I, so every
derivative reduces to a derivative of a scalar profile g(u):

    d^k f / dI^k = gamma^k g^(k)(u),    d f / dx = g'(u).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InstabilityError, InvalidArgumentError, UnsupportedOrderError

MAX_DERIVATIVE_ORDER = 6


class Kernel:
    """Interface shared by the kernel families."""

    gamma: float
    eta: float

    def profile_taylor(self, u0: float, order: int) -> np.ndarray:
        """Derivatives g^(0..order)(u0)."""
        raise NotImplementedError

    def _raw_profile(self, u):
        """g(u) without domain checks; may contain inf or nan."""
        raise NotImplementedError

    def _profile(self, u):
        return self._raw_profile(u)

    def __call__(self, x, I=0.0):
        u = np.asarray(x, dtype=float) + self.gamma * np.asarray(I, dtype=float)
        return self._profile(u)

    def state_derivative(self, x0: float) -> float:
        return float(self.profile_taylor(x0, 1)[1])

    def input_derivatives(self, x0: float, R: int) -> np.ndarray:
        """[d^i f / dI^i (x0, 0)] for i = 1..R."""
        if R < 0:
            raise InvalidArgumentError("R must be non-negative")
        if R > MAX_DERIVATIVE_ORDER:
            raise UnsupportedOrderError(
                f"derivative order {R} exceeds the supported {MAX_DERIVATIVE_ORDER}"
            )
        if R == 0:
            return np.zeros(0)
        g = self.profile_taylor(x0, R)
        return np.array([self.gamma**i * g[i] for i in range(1, R + 1)])


def _series_power(u0: float, p: float, order: int) -> np.ndarray:
    """Taylor coefficients of (u0 + t)^p in t."""
    coef = np.zeros(order + 1)
    if float(p).is_integer() and p >= 0:
        p = int(p)
        for k in range(min(p, order) + 1):
            coef[k] = math.comb(p, k) * u0 ** (p - k)
        return coef
    if u0 <= 0:
        raise DomainError(f"non-integer exponent p={p} needs a positive base, got {u0}")
    binom = 1.0
    for k in range(order + 1):
        coef[k] = binom * u0 ** (p - k)
        binom *= (p - k) / (k + 1)
    return coef


def _series_reciprocal(a: np.ndarray) -> np.ndarray:
    if a[0] == 0:
        raise DomainError("pole of the Mackey-Glass kernel")
    b = np.zeros_like(a)
    b[0] = 1.0 / a[0]
    for k in range(1, a.size):
        b[k] = -np.dot(a[1 : k + 1], b[k - 1 :: -1][:k]) / a[0]
    return b


@dataclass(frozen=True)
class MackeyGlass(Kernel):
    """f(x, I) = eta (x + gamma I) / (1 + (x + gamma I)^p)."""

    eta: float
    gamma: float
    p: float = 2.0

    def __post_init__(self):
        if not (np.isfinite(self.eta) and np.isfinite(self.gamma)):
            raise InvalidArgumentError("eta and gamma must be finite")
        if not self.p > 0:
            raise InvalidArgumentError(f"exponent p must be positive, got {self.p}")

    def _raw_profile(self, u):
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            denom = 1.0 + np.power(u, self.p)
            return np.where(denom == 0, np.nan, self.eta * u / denom)

    def _profile(self, u):
        out = self._raw_profile(u)
        if not np.all(np.isfinite(out)):
            raise DomainError("Mackey-Glass kernel evaluated at a pole or outside its domain")
        return out

    def profile_taylor(self, u0: float, order: int) -> np.ndarray:
        # g = eta * u * 1/(1 + u^p), expanded as truncated power series in t = u - u0
        denom = _series_power(u0, self.p, order)
        denom[0] += 1.0
        recip = _series_reciprocal(denom)
        numer = np.zeros(order + 1)
        numer[0] = self.eta * u0
        if order >= 1:
            numer[1] = self.eta
        series = np.convolve(numer, recip)[: order + 1]
        return series * np.array([math.factorial(k) for k in range(order + 1)])


@dataclass(frozen=True)
class Ikeda(Kernel):
    """f(x, I) = eta sin^2(x + gamma I + phi)."""

    eta: float
    gamma: float
    phi: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.eta, self.gamma, self.phi)):
            raise InvalidArgumentError("Ikeda parameters must be finite")

    def _raw_profile(self, u):
        return self.eta * np.sin(u + self.phi) ** 2

    def profile_taylor(self, u0: float, order: int) -> np.ndarray:
        w = u0 + self.phi
        out = np.empty(order + 1)
        out[0] = self.eta * math.sin(w) ** 2
        for k in range(1, order + 1):
            out[k] = self.eta * 2.0 ** (k - 1) * math.sin(2 * w + (k - 1) * math.pi / 2)
        return out


def eval_kernel(kernel: Kernel, x, I=0.0):
    return kernel(x, I)


def state_derivative(kernel: Kernel, x0: float) -> float:
    return kernel.state_derivative(x0)


def input_derivatives(kernel: Kernel, x0: float, R: int) -> np.ndarray:
    return kernel.input_derivatives(x0, R)


@dataclass(frozen=True)
class Equilibrium:
    x0: float
    slope: float
    stable: bool

    @classmethod
    def at(cls, kernel: Kernel, x0: float) -> Equilibrium:
        slope = kernel.state_derivative(x0)
        return cls(float(x0), float(slope), bool(abs(slope) < 1.0))


def find_equilibria(kernel: Kernel, bracket=(-5.0, 5.0), grid: int = 1000) -> list[Equilibrium]:
    """Roots of f(x, 0) - x located by sign changes on a uniform grid.

    A root sitting exactly on a grid node is attributed to the cell on its
    left; roots are refined with Brent's method to 1e-12.
    """
    lo, hi = map(float, bracket)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise InvalidArgumentError(f"invalid bracket {bracket}")
    if grid < 2:
        raise InvalidArgumentError("grid must have at least two nodes")

    def g(x):
        return float(kernel(x, 0.0)) - x

    xs = np.linspace(lo, hi, grid)
    vals = kernel._raw_profile(xs) - xs
    vals = np.where(np.isfinite(vals), vals, np.nan)

    roots = []
    if vals[0] == 0:
        roots.append(xs[0])
    for a, b, ga, gb in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if np.isnan(ga) or np.isnan(gb):
            continue
        if gb == 0:
            roots.append(b)
        elif ga != 0 and ga * gb < 0:
            try:
                roots.append(brentq(g, a, b, xtol=1e-12, rtol=4 * np.finfo(float).eps))
            except (ValueError, DomainError):
                continue

    out = []
    for x0 in roots:
        # sign changes across a pole are not fixed points
        try:
            if abs(g(x0)) >= 1e-10:
                continue
        except DomainError:
            continue
        out.append(Equilibrium.at(kernel, x0))
    return out


def select_equilibrium(kernel: Kernel, policy: str = "largest", bracket=(-5.0, 5.0),
                       grid: int = 1000) -> Equilibrium:
    """Pick one stable equilibrium; ``policy`` is 'largest' or 'smallest'."""
    stable = [e for e in find_equilibria(kernel, bracket, grid) if e.stable]
    if not stable:
        raise InstabilityError(f"no stable equilibrium of {kernel} in {bracket}")
    if policy == "largest":
        return max(stable, key=lambda e: e.x0)
    if policy == "smallest":
        return min(stable, key=lambda e: e.x0)
    raise InvalidArgumentError(f"unknown equilibrium policy {policy!r}")
