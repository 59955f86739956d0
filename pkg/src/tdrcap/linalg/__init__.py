"""Matrix-calculus and moment primitives."""

from .moments import (
    GaussianMoments,
    MomentTable,
    check_order,
    check_zero_mean,
    expanded_covariance,
    gaussian_moment,
    hafnian,
    moment,
)
from .polynomial import MultiIndexPolynomial, monomial_basis, poly_expectation, poly_mul
from .stein import spectral_radius, stein_solve, stein_solve_kron
from .vech import (
    duplication_matrix,
    elimination_matrix,
    sigma_index,
    sigma_inverse,
    unvech,
    vec_op,
    vech_indices,
    vech_op,
    vech_size,
)

__all__ = [
    "GaussianMoments",
    "MomentTable",
    "MultiIndexPolynomial",
    "check_order",
    "check_zero_mean",
    "duplication_matrix",
    "elimination_matrix",
    "expanded_covariance",
    "gaussian_moment",
    "hafnian",
    "moment",
    "monomial_basis",
    "poly_expectation",
    "poly_mul",
    "sigma_index",
    "sigma_inverse",
    "spectral_radius",
    "stein_solve",
    "stein_solve_kron",
    "unvech",
    "vec_op",
    "vech_indices",
    "vech_op",
    "vech_size",
]
