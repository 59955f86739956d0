import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.signal import lfilter

from tdrcap.errors import DivergenceError, InvalidArgumentError
from tdrcap.kernels import Kernel, MackeyGlass, select_equilibrium
from tdrcap.reservoir import (
    InputSpec,
    ParallelConfig,
    ReservoirConfig,
    gen_input,
    reservoir_map,
    run_continuous,
    run_discrete,
    run_parallel,
)


class LinearKernel(Kernel):
    """f(x, I) = alpha x + beta I, written as alpha (x + (beta / alpha) I)."""

    def __init__(self, alpha, beta):
        self.eta, self.gamma = alpha, beta / alpha

    def _raw_profile(self, u):
        return self.eta * np.asarray(u, dtype=float)

    def profile_taylor(self, u0, order):
        out = np.zeros(order + 1)
        out[0] = self.eta * u0
        if order:
            out[1] = self.eta
        return out


def mg_config(N=20, d=0.25, eta=2.0, gamma=0.6163, n=1, seed=0, low=-1, high=1):
    mask = np.random.default_rng(seed).uniform(low, high, (N, n))
    return ReservoirConfig(N, d, MackeyGlass(eta, gamma), mask)


def naive_discrete(cfg, Z, x_init):
    x = np.array(x_init, dtype=float)
    out = []
    for t in range(Z.shape[1]):
        x = reservoir_map(cfg, x, cfg.mask @ Z[:, t])
        out.append(x.copy())
    return np.array(out).T


def fine_dde(alpha, beta, cfg, Z, steps_per_neuron, x_hist):
    """Exponential integrator with linear interpolation of the delayed term."""
    N, M = cfg.N, steps_per_neuron
    h = cfg.d / M
    K = N * M
    decay = np.exp(-h)
    c = (h - 1 + decay) / h
    hist = np.full(K + 1, x_hist)
    forcing = np.repeat(cfg.mask @ Z, M, axis=0)
    X = np.empty((N, Z.shape[1]))
    for t in range(Z.shape[1]):
        y0, y1 = hist[:-1], hist[1:]
        drive = (1 - decay) * (beta * forcing[:, t] + alpha * y0) + alpha * (y1 - y0) * c
        path, _ = lfilter([1.0], [1.0, -decay], drive, zi=[decay * hist[-1]])
        hist = np.concatenate(([hist[-1]], path))
        X[:, t] = hist[np.arange(1, N + 1) * M]
    return X


class TestInput:
    def test_zero_covariance(self):
        assert_array_equal(gen_input(InputSpec(np.zeros((2, 2))), 50, 1), np.zeros((2, 50)))

    def test_determinism(self):
        spec = InputSpec(np.eye(2))
        assert_array_equal(gen_input(spec, 100, 7), gen_input(spec, 100, 7))

    def test_sample_covariance(self, fig3_cov):
        Z = gen_input(InputSpec(fig3_cov), 100_000, 3)
        err = np.linalg.norm(np.cov(Z) - fig3_cov) / np.linalg.norm(fig3_cov)
        assert err < 0.05

    def test_not_psd(self):
        with pytest.raises(InvalidArgumentError):
            gen_input(InputSpec([[1.0, 2.0], [2.0, 1.0]]), 10, 0)


class TestDiscrete:
    def test_matches_sequential_recursion(self, rng):
        cfg = mg_config(N=7, d=0.4, n=2, seed=1)
        Z = 0.05 * rng.standard_normal((2, 60))
        x_init = np.linspace(0.8, 1.1, 7)
        assert_allclose(run_discrete(cfg, Z, 0, x_init=x_init), naive_discrete(cfg, Z, x_init),
                        rtol=1e-12, atol=1e-14)

    def test_single_neuron(self, rng):
        cfg = mg_config(N=1, d=0.3)
        Z = 0.1 * rng.standard_normal((1, 30))
        a = 1 / 1.3
        x, ref = 0.7, []
        for t in range(30):
            x = a * x + (1 - a) * float(cfg.kernel(x, cfg.mask[0, 0] * Z[0, t]))
            ref.append(x)
        assert_allclose(run_discrete(cfg, Z, 0, x_init=0.7)[0], ref, rtol=1e-13)

    def test_equilibrium_is_fixed(self):
        cfg = mg_config()
        X = run_discrete(cfg, np.zeros((1, 50)), 0, equilibrium=1.0)
        assert_allclose(X, 1.0, atol=1e-14)

    def test_small_inputs_stay_near_equilibrium(self, fig3_cov):
        cfg = mg_config(n=3)
        Z = gen_input(InputSpec(fig3_cov), 5000, 2)
        X = run_discrete(cfg, Z, equilibrium=select_equilibrium(cfg.kernel))
        assert np.all(np.abs(X - 1.0) < 0.5)

    def test_washout_and_errors(self):
        cfg = mg_config()
        assert run_discrete(cfg, np.zeros((1, 30)), 10).shape == (20, 20)
        with pytest.raises(InvalidArgumentError):
            run_discrete(cfg, np.zeros((1, 30)), 30)
        with pytest.raises(InvalidArgumentError):
            run_discrete(cfg, np.zeros((2, 30)), 0)

    def test_divergence_reports_time(self):
        cfg = ReservoirConfig(3, 0.5, LinearKernel(5.0, 1.0), np.ones((3, 1)))
        with pytest.raises(DivergenceError) as info:
            run_discrete(cfg, np.ones((1, 2000)), 0, x_init=1.0)
        assert info.value.t is not None and 0 < info.value.t < 2000

    def test_washout_forgets_initial_layer(self, rng):
        cfg = mg_config()
        Z = 0.04 * rng.standard_normal((1, 100))
        X1 = run_discrete(cfg, Z, 0, x_init=0.9)
        X2 = run_discrete(cfg, Z, 0, x_init=1.1)
        assert np.max(np.abs(X1[:, -1] - X2[:, -1])) < 1e-8


class TestContinuous:
    def test_equilibrium_is_fixed(self):
        cfg = mg_config()
        X = run_continuous(cfg, np.zeros((1, 40)), 32, 0, equilibrium=1.0)
        assert_allclose(X, 1.0, atol=1e-6)

    def test_linear_dde_oracle(self, rng):
        alpha, beta = 0.5, 0.8
        cfg = ReservoirConfig(5, 0.2, LinearKernel(alpha, beta), rng.uniform(-1, 1, (5, 1)))
        Z = 0.5 * rng.standard_normal((1, 40))
        X = run_continuous(cfg, Z, 64, 0, x_init=0.3)
        ref = fine_dde(alpha, beta, cfg, Z, 4096, 0.3)
        assert np.max(np.abs(X - ref)) < 1e-3

    def test_correlates_with_discrete(self, fig3_cov):
        cfg = mg_config(n=3)
        Z = gen_input(InputSpec(fig3_cov), 3000, 5)
        eq = select_equilibrium(cfg.kernel)
        Xd = run_discrete(cfg, Z, equilibrium=eq)
        Xc = run_continuous(cfg, Z, 64, equilibrium=eq)
        corr = [np.corrcoef(Xd[i], Xc[i])[0, 1] for i in range(cfg.N)]
        assert min(corr) > 0.95

    def test_rejects_bad_oversampling(self):
        with pytest.raises(InvalidArgumentError):
            run_continuous(mg_config(), np.zeros((1, 10)), 1, 0)


class TestParallel:
    def test_single_member(self, rng):
        cfg = mg_config()
        Z = 0.05 * rng.standard_normal((1, 300))
        assert_array_equal(run_parallel(cfg, Z, 50, equilibria=[1.0]),
                           run_discrete(cfg, Z, 50, equilibrium=1.0))

    def test_identical_members(self, rng):
        cfg = mg_config(N=10)
        Z = 0.05 * rng.standard_normal((1, 300))
        X = run_parallel(ParallelConfig((cfg, cfg)), Z, 50, equilibria=[1.0, 1.0])
        assert_array_equal(X[:10], X[10:])

    def test_shared_input_couples_blocks(self):
        a, b = mg_config(N=10, eta=1.5), mg_config(N=10, eta=2.8)
        Z = gen_input(InputSpec([[1e-3]]), 100_000, 4)
        eqs = [select_equilibrium(a.kernel), select_equilibrium(b.kernel)]
        X = run_parallel(ParallelConfig((a, b)), Z, equilibria=eqs)
        corr = np.corrcoef(X)[:10, 10:]
        # independent blocks would give |corr| ~ 1 / sqrt(T) ~ 0.003
        assert np.max(np.abs(corr)) > 0.1

    def test_input_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            ParallelConfig((mg_config(n=1), mg_config(n=2)))
