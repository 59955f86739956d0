"""Sparse multivariate polynomials over the input variables z_1..z_n."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Mapping

import numpy as np

from ..errors import InvalidArgumentError


def monomial_basis(n: int, max_degree: int, min_degree: int = 0) -> list[tuple[int, ...]]:
    """All exponent vectors of length n with total degree in [min_degree, max_degree].

    Ordered by degree, then lexicographically by the variables involved.
    """
    basis = []
    for deg in range(min_degree, max_degree + 1):
        for combo in combinations_with_replacement(range(n), deg):
            k = [0] * n
            for var in combo:
                k[var] += 1
            basis.append(tuple(k))
    return basis


def add_exponents(a, b) -> tuple[int, ...]:
    return tuple(x + y for x, y in zip(a, b))


@dataclass(frozen=True)
class MultiIndexPolynomial:
    n_vars: int
    terms: Mapping[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, c in self.terms.items():
            k = tuple(int(e) for e in k)
            if len(k) != self.n_vars:
                raise InvalidArgumentError(
                    f"exponent {k} has length {len(k)}, expected {self.n_vars}"
                )
            if any(e < 0 for e in k):
                raise InvalidArgumentError(f"negative exponent in {k}")
            if c != 0:
                clean[k] = clean.get(k, 0) + c
        clean = {k: c for k, c in clean.items() if c != 0}
        object.__setattr__(self, "terms", clean)

    @classmethod
    def constant(cls, n_vars: int, value: float) -> MultiIndexPolynomial:
        return cls(n_vars, {(0,) * n_vars: value})

    @classmethod
    def variable(cls, n_vars: int, index: int, power: int = 1) -> MultiIndexPolynomial:
        k = [0] * n_vars
        k[index] = power
        return cls(n_vars, {tuple(k): 1.0})

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def __len__(self):
        return len(self.terms)

    def _coerce(self, other) -> MultiIndexPolynomial:
        if isinstance(other, MultiIndexPolynomial):
            if other.n_vars != self.n_vars:
                raise InvalidArgumentError("polynomials live in different variable sets")
            return other
        return MultiIndexPolynomial.constant(self.n_vars, other)

    def __add__(self, other):
        other = self._coerce(other)
        acc = defaultdict(float, self.terms)
        for k, c in other.terms.items():
            acc[k] += c
        return MultiIndexPolynomial(self.n_vars, acc)

    __radd__ = __add__

    def __neg__(self):
        return MultiIndexPolynomial(self.n_vars, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __mul__(self, other):
        if isinstance(other, MultiIndexPolynomial):
            return poly_mul(self, other)
        return MultiIndexPolynomial(self.n_vars, {k: c * other for k, c in self.terms.items()})

    __rmul__ = __mul__

    def evaluate(self, Z) -> np.ndarray:
        """Evaluate at the columns of an n x T array (or a single n-vector)."""
        Z = np.asarray(Z, dtype=float)
        single = Z.ndim == 1
        Z = Z.reshape(self.n_vars, -1)
        out = np.zeros(Z.shape[1])
        for k, c in self.terms.items():
            term = np.full(Z.shape[1], c, dtype=float)
            for var, e in enumerate(k):
                if e:
                    term *= Z[var] ** e
            out += term
        return out[0] if single else out

    def expectation(self, provider) -> float:
        return poly_expectation(self, provider)


def poly_mul(p: MultiIndexPolynomial, q: MultiIndexPolynomial) -> MultiIndexPolynomial:
    """Exact product: convolution of the exponent vectors."""
    if p.n_vars != q.n_vars:
        raise InvalidArgumentError("polynomials live in different variable sets")
    acc = defaultdict(float)
    for kp, cp in p.terms.items():
        for kq, cq in q.terms.items():
            acc[add_exponents(kp, kq)] += cp * cq
    return MultiIndexPolynomial(p.n_vars, acc)


def poly_expectation(p: MultiIndexPolynomial, provider) -> float:
    """Replace every monomial by the corresponding input moment and sum."""
    return float(sum(c * provider.moment(k) for k, c in p.terms.items()))
