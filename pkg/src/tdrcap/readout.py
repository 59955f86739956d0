"""Ridge readouts, characteristic error, capacity and finite-sample error.

Population readout for ridge constant lam:

    W = (Gamma(0) + lam I)^{-1} Cov(x, y),   a = mu_y - W^T mu_x,

whose mean squared error is the characteristic error.  Sample versions use
the 1/T moment estimators with the centering matrix A = I_T - i i^T / T and
curly-R = (X A X^T + lam T I)^{-1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import InvalidArgumentError, NumericalError, SingularityError
from .model import ModelMoments
from .tasks import TaskSpec, task_moments

CONSISTENCY_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Readout:
    W: np.ndarray
    a: np.ndarray
    lam: float

    def predict(self, X) -> np.ndarray:
        """q x T outputs for the state columns of ``X``."""
        return self.W.T @ np.asarray(X, dtype=float) + self.a[:, None]


@dataclass(frozen=True, eq=False)
class SamplePair:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        Y = np.array(self.Y, dtype=float, ndmin=2)
        if X.shape[1] != Y.shape[1]:
            raise InvalidArgumentError(f"X has {X.shape[1]} columns, Y has {Y.shape[1]}")
        if X.shape[1] < 2:
            raise InvalidArgumentError("need at least two observations")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def T(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class CapacityReport:
    mse_char: float
    capacity: float
    trace_cov_yy: float
    nmse: float
    consistency: float = 0.0
    """Gap between the two closed forms of the error, relative to trace Cov(y,y)."""


def _spd_solve(M: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve M X = B for symmetric PSD M, with one diagonal jitter retry."""
    M = 0.5 * (M + M.T)
    try:
        return cho_solve(cho_factor(M), B)
    except LinAlgError:
        pass
    jitter = 1e-12 * np.trace(M) / M.shape[0]
    try:
        if not jitter > 0:
            raise LinAlgError("zero trace")
        return cho_solve(cho_factor(M + jitter * np.eye(M.shape[0])), B)
    except LinAlgError:
        raise SingularityError(
            "ridge system is singular; use a positive ridge constant lam"
        ) from None


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not lam >= 0:
        raise InvalidArgumentError(f"ridge constant must be >= 0, got {lam}")
    return lam


def ridge_solve(gamma0, covXY, mu_x, mu_y, lam: float) -> Readout:
    lam = _check_lam(lam)
    gamma0 = np.asarray(gamma0, dtype=float)
    covXY = np.asarray(covXY, dtype=float).reshape(gamma0.shape[0], -1)
    W = _spd_solve(gamma0 + lam * np.eye(gamma0.shape[0]), covXY)
    a = np.asarray(mu_y, dtype=float).reshape(-1) - W.T @ np.asarray(mu_x, dtype=float)
    return Readout(W, a, lam)


def _mse_expanded(cov_yy, gamma0, covXY, lam) -> float:
    """trace(Cov(y,y) - C^T (G + lam)^-1 (G + 2 lam) (G + lam)^-1 C) by eigendecomposition."""
    w, V = np.linalg.eigh(0.5 * (gamma0 + gamma0.T))
    Ct = V.T @ covXY
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(w + lam > 0, (w + 2 * lam) / (w + lam) ** 2, 0.0)
    return float(np.trace(cov_yy) - np.sum(weight[:, None] * Ct**2))


def capacity_from_moments(cov_yy, gamma0, covXY, lam: float,
                          readout: Readout | None = None) -> CapacityReport:
    """Characteristic error and capacity of the optimal ridge readout."""
    cov_yy = np.atleast_2d(np.asarray(cov_yy, dtype=float))
    gamma0 = np.asarray(gamma0, dtype=float)
    covXY = np.asarray(covXY, dtype=float).reshape(gamma0.shape[0], -1)
    if readout is None:
        readout = ridge_solve(gamma0, covXY, np.zeros(gamma0.shape[0]), np.zeros(covXY.shape[1]), lam)
    W, lam = readout.W, readout.lam
    tr_yy = float(np.trace(cov_yy))
    mse = float(tr_yy - np.trace(W.T @ (gamma0 + 2 * lam * np.eye(gamma0.shape[0])) @ W))
    expanded = _mse_expanded(cov_yy, gamma0, covXY, lam)
    scale = max(abs(tr_yy), np.finfo(float).tiny)
    gap = abs(mse - expanded) / scale
    nmse = mse / tr_yy if tr_yy > 0 else float("nan")
    return CapacityReport(mse, 1.0 - nmse, tr_yy, nmse, gap)


def characteristic_error(model: ModelMoments, task: TaskSpec, provider, lam: float,
                         strict: bool = False) -> CapacityReport:
    """Capacity of the modelled reservoir on ``task``.

    With ``strict`` a disagreement between the two closed forms of the error
    beyond 1e-10 (relative to trace Cov(y,y)) raises NumericalError.
    """
    mu_y, cov_yy, covXY = task_moments(task, model, provider)
    readout = ridge_solve(model.gamma0, covXY, model.mu_x, mu_y, lam)
    report = capacity_from_moments(cov_yy, model.gamma0, covXY, lam, readout)
    if strict and report.consistency > CONSISTENCY_RTOL:
        raise NumericalError(
            f"closed forms of the characteristic error disagree by {report.consistency:.3g}"
        )
    return report


def optimal_readout(model: ModelMoments, task: TaskSpec, provider, lam: float) -> Readout:
    mu_y, _, covXY = task_moments(task, model, provider)
    return ridge_solve(model.gamma0, covXY, model.mu_x, mu_y, lam)


def empirical_moments(s: SamplePair):
    """(mu_x, mu_y, Gamma(0), Cov(y, y), Cov(x, y)) with 1/T normalization."""
    T = s.T
    mu_x = s.X.mean(axis=1)
    mu_y = s.Y.mean(axis=1)
    Xc = s.X - mu_x[:, None]
    Yc = s.Y - mu_y[:, None]
    return mu_x, mu_y, Xc @ Xc.T / T, Yc @ Yc.T / T, Xc @ Yc.T / T


def _centered(s: SamplePair):
    Xc = s.X - s.X.mean(axis=1, keepdims=True)
    Yc = s.Y - s.Y.mean(axis=1, keepdims=True)
    return Xc, Yc


def ridge_fit_samples(s: SamplePair, lam: float) -> Readout:
    """W = (X A X^T + lam T I)^{-1} X A Y^T,  a = (Y - W^T X) i / T."""
    lam = _check_lam(lam)
    Xc, Yc = _centered(s)
    N = s.X.shape[0]
    W = _spd_solve(Xc @ Xc.T + lam * s.T * np.eye(N), Xc @ Yc.T)
    a = (s.Y - W.T @ s.X).mean(axis=1)
    return Readout(W, a, lam)


def _curly_r(X: np.ndarray, lam: float) -> np.ndarray:
    N, T = X.shape
    Xc = X - X.mean(axis=1, keepdims=True)
    return _spd_solve(Xc @ Xc.T + lam * T * np.eye(N), np.eye(N))


@dataclass(frozen=True, eq=False)
class RidgeSamplingMoments:
    """Conditional distribution of the ridge estimator given the states X.

    vec(W_hat - W) ~ N(vec(bias_W), Sigma_W_col kron Sigma_W_row) and
    a_hat - a ~ N(bias_a, Sigma_a).  ``Sigma_Wa`` is the closed form from the
    literature; ``Sigma_Wa_centered`` is Cov(vec W_hat, a_hat) obtained by
    direct propagation of the noise, which Monte Carlo confirms.
    """

    bias_W: np.ndarray
    Sigma_W_row: np.ndarray
    Sigma_W_col: np.ndarray
    bias_a: np.ndarray
    Sigma_a: np.ndarray
    Sigma_Wa: np.ndarray
    Sigma_Wa_centered: np.ndarray

    @property
    def cov_vec_W(self) -> np.ndarray:
        return np.kron(self.Sigma_W_col, self.Sigma_W_row)


def ridge_sampling_moments(X, lam: float, W_lambda, sigma_eps_q) -> RidgeSamplingMoments:
    """Moments of (W_hat, a_hat) | X under y = a + W^T x + noise, noise ~ IN(0, sigma_eps_q).

    ``W_lambda`` is the coefficient matrix of that regression model.
    """
    lam = _check_lam(lam)
    X = np.array(X, dtype=float, ndmin=2)
    N, T = X.shape
    W = np.asarray(W_lambda, dtype=float).reshape(N, -1)
    S = np.atleast_2d(np.asarray(sigma_eps_q, dtype=float))
    R = _curly_r(X, lam)
    shrink = np.eye(N) - lam * T * R
    xsum = X.sum(axis=1)  # X i_T
    row = shrink @ R
    row = 0.5 * (row + row.T)
    bias_W = -lam * T * R @ W
    bias_a = lam * W.T @ R @ xsum
    Sigma_a = (1.0 + float(xsum @ row @ xsum) / T) * S / T
    shrunk_W = shrink @ W
    vec_term = np.outer(shrunk_W.reshape(-1, order="F"), xsum @ shrunk_W)
    kron_term = np.kron(S, (row @ xsum)[:, None])
    Sigma_Wa = (vec_term - kron_term) / T
    return RidgeSamplingMoments(
        bias_W=bias_W,
        Sigma_W_row=row,
        Sigma_W_col=S,
        bias_a=bias_a,
        Sigma_a=Sigma_a,
        Sigma_Wa=Sigma_Wa,
        Sigma_Wa_centered=-kron_term / T,
    )


def total_error_from_moments(mse_char: float, trace_sigma_eps: float, gamma0, mu_x,
                             W_lambda, X, lam: float) -> float:
    """Expected out-of-sample error of the readout trained on states ``X``.

    mse_char + tr(S)/T + tr(S) tr((I - lam T RR) RR Q)
             + lam^2 T^2 tr(W^T RR Q RR W) + 2 lam^2 T tr(W^T RR W),
    with RR = (X A X^T + lam T I)^{-1} and
    Q = Gamma(0) + mu mu^T + xbar xbar^T - 2 mu xbar^T.
    """
    lam = _check_lam(lam)
    X = np.array(X, dtype=float, ndmin=2)
    N, T = X.shape
    gamma0 = np.asarray(gamma0, dtype=float)
    mu = np.asarray(mu_x, dtype=float)
    W = np.asarray(W_lambda, dtype=float).reshape(N, -1)
    RR = _curly_r(X, lam)
    xbar = X.mean(axis=1)
    Q = gamma0 + np.outer(mu, mu) + np.outer(xbar, xbar) - 2.0 * np.outer(mu, xbar)
    shrink = np.eye(N) - lam * T * RR
    RW = RR @ W
    return float(
        mse_char
        + trace_sigma_eps / T
        + trace_sigma_eps * np.trace(shrink @ RR @ Q)
        + lam**2 * T**2 * np.trace(RW.T @ Q @ RW)
        + 2 * lam**2 * T * np.trace(W.T @ RW)
    )


def total_error(model: ModelMoments, task: TaskSpec, provider, X, lam: float,
                trace_sigma_eps: float | None = None) -> float:
    """Total error of a readout trained on the state sample ``X``.

    The regression noise level defaults to the characteristic error itself,
    i.e. the residual variance left by the optimal readout.
    """
    mu_y, cov_yy, covXY = task_moments(task, model, provider)
    readout = ridge_solve(model.gamma0, covXY, model.mu_x, mu_y, lam)
    report = capacity_from_moments(cov_yy, model.gamma0, covXY, lam, readout)
    if trace_sigma_eps is None:
        trace_sigma_eps = report.mse_char
    return total_error_from_moments(
        report.mse_char, trace_sigma_eps, model.gamma0, model.mu_x, readout.W, X, lam
    )


def total_error_approx(s: SamplePair, lam: float) -> tuple[float, float]:
    """Fully empirical (mse_char, mse_total) estimates from one training sample."""
    lam = _check_lam(lam)
    Xc, Yc = _centered(s)
    N, T = s.X.shape
    RR = _curly_r(s.X, lam)
    XAY = Xc @ Yc.T
    XAX = Xc @ Xc.T
    mse_char = float(
        np.trace(Yc @ Yc.T - XAY.T @ (np.eye(N) + lam * T * RR) @ RR @ XAY) / T
    )
    shrink = np.eye(N) - lam * T * RR
    W_hat = RR @ XAY
    total = (
        mse_char
        + mse_char / T * (1.0 + np.trace(shrink @ RR @ XAX))
        + lam**2 * T * np.trace(W_hat.T @ RR @ (3 * np.eye(N) - lam * T * RR) @ W_hat)
    )
    return mse_char, float(total)
