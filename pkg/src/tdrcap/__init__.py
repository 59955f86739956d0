"""Time-delay reservoirs and their analytic memory capacity.

Simulate single or parallel time-delay reservoirs, build the VAR(1) model
obtained by linearizing them at a stable equilibrium, and evaluate memory
capacities, ridge readouts and finite-sample errors in closed form.
"""

from .errors import (
    DivergenceError,
    DomainError,
    InstabilityError,
    InvalidArgumentError,
    NumericalError,
    SingularityError,
    TDRError,
    UnsupportedOrderError,
)
from .kernels import (
    Equilibrium,
    Ikeda,
    MackeyGlass,
    eval_kernel,
    find_equilibria,
    input_derivatives,
    select_equilibrium,
    state_derivative,
)
from .linalg import GaussianMoments, MomentTable, MultiIndexPolynomial
from .model import (
    ModelMoments,
    connectivity_matrix,
    eps_moments,
    model_moments,
    simulate_var,
    vr_polynomial,
)
from .readout import (
    CapacityReport,
    Readout,
    SamplePair,
    capacity_from_moments,
    characteristic_error,
    empirical_moments,
    ridge_fit_samples,
    ridge_sampling_moments,
    ridge_solve,
    total_error,
    total_error_approx,
    total_error_from_moments,
)
from .reservoir import (
    InputSpec,
    ParallelConfig,
    ReservoirConfig,
    gen_input,
    reservoir_map,
    run_continuous,
    run_discrete,
    run_parallel,
)
from .tasks import (
    LinearTask,
    QuadraticTask,
    diag_quadratic_task,
    eps_cross_moment,
    quadratic_from_matrix,
    target_series,
    task_cross_covariance,
    task_output_covariance,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
