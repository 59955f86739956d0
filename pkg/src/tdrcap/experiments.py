"""Experiment drivers: error surfaces, robustness studies and grid search.

Every random quantity is drawn from a generator keyed by the master seed and
the coordinates of the point that uses it, so results do not depend on the
grid size, the number of workers or the completion order.
"""

from __future__ import annotations

import copy
import csv
import io
import itertools
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from .errors import InstabilityError, InvalidArgumentError, TDRError
from .kernels import Ikeda, MackeyGlass, select_equilibrium
from .linalg.moments import GaussianMoments
from .linalg.vech import unvech
from .model import DEFAULT_R, model_moments
from .readout import SamplePair, characteristic_error, ridge_fit_samples
from .reservoir import (
    InputSpec,
    ParallelConfig,
    ReservoirConfig,
    gen_input,
    run_continuous,
    run_discrete,
)
from .tasks import (
    LinearTask,
    QuadraticTask,
    diag_quadratic_task,
    quadratic_from_matrix,
    target_series,
    task_output_covariance,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# stream identifiers for keyed generators
MASK, TRAIN, TEST, DRAW, TASK = range(1, 6)

FIG3_VECH = [0.0016, 0.0012, 0.0008, 0.0017, 0.0002, 0.0018]


class ConfigError(TDRError, ValueError):
    """The experiment configuration is malformed."""


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def keyed_seed(seed: int, *key: int) -> int:
    """A plain integer seed equivalent to ``keyed_rng(seed, *key)``'s stream."""
    state = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)).generate_state(1)
    return int(state[0])


# ---------------------------------------------------------------- config


BASE_DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "lambda": 1e-10,
    "R": DEFAULT_R,
    "workers": 1,
    "input": {"vech": FIG3_VECH},
    "kernel": {"family": "mackey-glass", "eta": 2.0, "gamma": 0.6163, "p": 2.0, "phi": 0.0},
    "reservoir": {"N": 20, "d": 0.25},
    "mask": {"low": -1.0, "high": 1.0},
    "task": {"kind": "diag-quadratic", "h": 3},
    "grid": {
        "d": {"start": 0.05, "stop": 1.0, "num": 20},
        "eta": {"start": 0.5, "stop": 3.0, "num": 20},
    },
    "mc": {
        "enabled": True,
        "continuous": True,
        "T_train": 10_000,
        "T_test": 10_000,
        "washout": 200,
        "replicates": 1,
        "oversample": 32,
    },
    "robust": {
        "pools": [1, 2, 5, 10, 20],
        "neurons": [20, 40, 60, 80, 100],
        "draws": 1000,
        "eta": [1.0, 3.0],
        "gamma": [-3.0, 3.0],
        "d": [0.0, 1.0],
        "mask": [-3.0, 3.0],
        "tasks": 1000,
        "task_h": 9,
        "task_weights": [-10.0, 10.0],
        "refine_members": True,
        "refine_sweeps": 2,
    },
}

# per-command overrides of the base defaults
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "surface": {},
    "capacity": {"mc": {"continuous": False}},
    "robust-params": {
        "input": {"cov": [[1e-4]]},
        "task": {"kind": "diag-quadratic", "h": 9},
    },
    "robust-task": {
        "input": {"cov": [[1e-4]]},
        "task": {"kind": "diag-quadratic", "h": 3},
        "grid": {
            "d": {"start": 0.1, "stop": 1.0, "num": 10},
            "eta": {"start": 1.1, "stop": 3.0, "num": 10},
            "gamma": {"start": -3.0, "stop": 3.0, "num": 7},
        },
    },
    "optimize": {
        "input": {"cov": [[1e-4]]},
        "task": {"kind": "diag-quadratic", "h": 3},
        "grid": {
            "d": {"start": 0.1, "stop": 1.0, "num": 10},
            "eta": {"start": 1.1, "stop": 3.0, "num": 10},
            "gamma": {"start": -3.0, "stop": 3.0, "num": 7},
        },
        "robust": {"pools": [1], "neurons": [20]},
    },
}


# tables whose keys are alternatives (cov or vech, per-kind task fields)
REPLACED_TABLES = {"input", "task"}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    # anything that is not a table on both sides (e.g. a grid axis given as
    # a list) replaces the default wholesale
    for key, value in override.items():
        if key in REPLACED_TABLES:
            out[key] = copy.deepcopy(value)
        elif isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def raw_config(command: str, path: str | None = None, overrides: dict | None = None) -> dict:
    raw = _merge(BASE_DEFAULTS, COMMAND_DEFAULTS.get(command, {}))
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = _merge(raw, tomllib.load(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    if overrides:
        raw = _merge(raw, overrides)
    return raw


def _axis(spec, name: str) -> np.ndarray:
    if isinstance(spec, dict):
        try:
            values = np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"grid axis {name} needs start, stop and num") from None
    elif isinstance(spec, (list, tuple)):
        values = np.asarray(spec, dtype=float)
    elif isinstance(spec, (int, float)):
        values = np.array([float(spec)])
    else:
        raise ConfigError(f"grid axis {name} must be a list or a start/stop/num table")
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise ConfigError(f"grid axis {name} must be non-empty and finite")
    return values


def _interval(value, name: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a two-element [low, high] list") from None
    if not lo <= hi:
        raise ConfigError(f"{name}: low must not exceed high")
    return lo, hi


def _input_cov(section: dict) -> np.ndarray:
    if "cov" in section:
        cov = np.array(section["cov"], dtype=float, ndmin=2)
    elif "vech" in section:
        try:
            cov = unvech(np.asarray(section["vech"], dtype=float))
        except (InvalidArgumentError, ValueError) as exc:
            raise ConfigError(f"input.vech: {exc}") from None
    else:
        raise ConfigError("input needs 'cov' or 'vech'")
    if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T):
        raise ConfigError("input covariance must be square and symmetric")
    if np.linalg.eigvalsh(cov).min() < -1e-12 * max(np.abs(cov).max(), 1e-300):
        raise ConfigError("input covariance must be positive semi-definite")
    return cov


def _task(section: dict, n: int):
    kind = section.get("kind", "diag-quadratic")
    try:
        h = int(section.get("h", 0))
        if kind == "diag-quadratic":
            return diag_quadratic_task(h, n, section.get("weights"))
        if kind == "quadratic":
            if "Qstar" in section:
                return quadratic_from_matrix(np.asarray(section["Qstar"], dtype=float), h, n)
            return QuadraticTask(np.asarray(section["Q"], dtype=float), h, n)
        if kind == "linear":
            task = LinearTask(np.asarray(section["L"], dtype=float), h)
            if task.n != n:
                raise ConfigError(f"task.L implies input dimension {task.n}, input has {n}")
            return task
    except KeyError as exc:
        raise ConfigError(f"task of kind {kind!r} is missing {exc}") from None
    except InvalidArgumentError as exc:
        raise ConfigError(f"task: {exc}") from None
    raise ConfigError(f"unknown task kind {kind!r}")


def make_kernel(family: str, eta: float, gamma: float, p: float = 2.0, phi: float = 0.0):
    if family in ("mackey-glass", "mg"):
        return MackeyGlass(eta, gamma, p)
    if family == "ikeda":
        return Ikeda(eta, gamma, phi)
    raise ConfigError(f"unknown kernel family {family!r}")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated experiment settings; see ``BASE_DEFAULTS`` for the layout."""

    seed: int
    lam: float
    R: int
    input_cov: np.ndarray
    family: str
    eta: float
    gamma: float
    p: float
    phi: float
    N: int
    d: float
    mask_range: tuple[float, float]
    mask_values: np.ndarray | None
    task: Any
    d_grid: np.ndarray
    eta_grid: np.ndarray
    gamma_grid: np.ndarray
    mc: dict
    robust: dict
    optimized: tuple = ()
    workers: int = 1
    out: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.input_cov.shape[0]

    def kernel(self, eta=None, gamma=None):
        return make_kernel(
            self.family,
            self.eta if eta is None else eta,
            self.gamma if gamma is None else gamma,
            self.p,
            self.phi,
        )

    def provider(self) -> GaussianMoments:
        return GaussianMoments(self.input_cov)

    def mask(self, N: int, *key: int) -> np.ndarray:
        if self.mask_values is not None:
            if self.mask_values.shape != (N, self.n):
                raise ConfigError(f"explicit mask must be {N} x {self.n}")
            return self.mask_values
        lo, hi = self.mask_range
        return keyed_rng(self.seed, MASK, *key).uniform(lo, hi, (N, self.n))


def parse_config(raw: dict) -> ExperimentConfig:
    try:
        seed = int(raw.get("seed", 0))
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        lam = float(raw.get("lambda", 0.0))
        if not lam >= 0:
            raise ConfigError("lambda must be >= 0")
        R = int(raw.get("R", DEFAULT_R))
        if not 0 <= R <= 6:
            raise ConfigError("R must lie in 0..6")
        cov = _input_cov(raw.get("input", {}))
        kern = raw.get("kernel", {})
        res = raw.get("reservoir", {})
        mask = raw.get("mask", {})
        grid = raw.get("grid", {})
        mc = dict(raw.get("mc", {}))
        robust = dict(raw.get("robust", {}))
        mask_values = mask.get("values")
        if mask_values is not None:
            mask_values = np.array(mask_values, dtype=float, ndmin=2)
        cfg = ExperimentConfig(
            seed=seed,
            lam=lam,
            R=R,
            input_cov=cov,
            family=str(kern.get("family", "mackey-glass")),
            eta=float(kern.get("eta", 2.0)),
            gamma=float(kern.get("gamma", 0.6163)),
            p=float(kern.get("p", 2.0)),
            phi=float(kern.get("phi", 0.0)),
            N=int(res.get("N", 20)),
            d=float(res.get("d", 0.25)),
            mask_range=_interval((mask.get("low", -1.0), mask.get("high", 1.0)), "mask"),
            mask_values=mask_values,
            task=_task(raw.get("task", {}), cov.shape[0]),
            d_grid=_axis(grid.get("d", res.get("d", 0.25)), "d"),
            eta_grid=_axis(grid.get("eta", kern.get("eta", 2.0)), "eta"),
            gamma_grid=_axis(grid.get("gamma", kern.get("gamma", 0.6163)), "gamma"),
            mc=mc,
            robust=robust,
            optimized=tuple(raw.get("optimized", ())),
            workers=max(1, int(raw.get("workers", 1))),
            out=raw.get("out"),
            raw=raw,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    make_kernel(cfg.family, 1.0, 1.0)  # rejects unknown families early
    if cfg.N < 1:
        raise ConfigError("reservoir.N must be >= 1")
    if np.any(cfg.d_grid <= 0):
        raise ConfigError("neuron separations must be positive")
    for key in ("T_train", "T_test", "washout", "replicates", "oversample"):
        mc[key] = int(mc.get(key, BASE_DEFAULTS["mc"][key]))
    if mc["washout"] < cfg.task.h:
        raise ConfigError("mc.washout must be at least the task lag h")
    if min(mc["T_train"], mc["T_test"]) < 2 or mc["replicates"] < 1:
        raise ConfigError("mc sample sizes must be >= 2 and replicates >= 1")
    for key in ("eta", "gamma", "d", "mask", "task_weights"):
        if key in robust:
            robust[key] = _interval(robust[key], f"robust.{key}")
    for key in ("pools", "neurons"):
        robust[key] = [int(v) for v in robust.get(key, [])]
        if not robust[key] or min(robust[key]) < 1:
            raise ConfigError(f"robust.{key} must be a non-empty list of positive integers")
    return cfg


def load_config(command: str, path: str | None = None, overrides: dict | None = None):
    return parse_config(raw_config(command, path, overrides))


# ---------------------------------------------------------------- helpers


def pool_sizes(total: int, pool: int) -> list[int]:
    """Split ``total`` neurons as evenly as possible over ``pool`` reservoirs."""
    if pool > total:
        raise InvalidArgumentError(f"cannot split {total} neurons over {pool} reservoirs")
    base, extra = divmod(total, pool)
    return [base + (1 if i < extra else 0) for i in range(pool)]


def run_pool(fn: Callable, items: Iterable, workers: int = 1) -> list:
    """Ordered map, in-process for one worker and over processes otherwise."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ";".join(_fmt(v) for v in value)
    return str(value)


def write_csv(rows: list[dict], header: list[str], path: str | None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[key]) for key in header])
    text = buf.getvalue()
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def failure_flag(exc: Exception) -> str:
    if isinstance(exc, InstabilityError):
        return "unstable"
    return "numerical:" + type(exc).__name__


def empirical_nmse(cfg: ExperimentConfig, pcfg, equilibria, continuous: bool,
                   replicate: int = 0) -> float:
    """Held-out NMSE of a ridge readout trained on a simulated sample."""
    mc = cfg.mc
    spec = InputSpec(cfg.input_cov)
    wash = mc["washout"]
    Ztr = gen_input(spec, mc["T_train"] + wash, keyed_rng(cfg.seed, TRAIN, replicate))
    Zte = gen_input(spec, mc["T_test"] + wash, keyed_rng(cfg.seed, TEST, replicate))

    def states(Z):
        blocks = []
        for c, eq in zip(pcfg, equilibria):
            if continuous:
                blocks.append(run_continuous(c, Z, mc["oversample"], wash, equilibrium=eq))
            else:
                blocks.append(run_discrete(c, Z, wash, equilibrium=eq))
        return np.vstack(blocks)

    Ytr = target_series(cfg.task, Ztr, wash)
    Yte = target_series(cfg.task, Zte, wash)
    readout = ridge_fit_samples(SamplePair(states(Ztr), Ytr), cfg.lam)
    resid = readout.predict(states(Zte)) - Yte
    denom = float(np.sum(Yte.var(axis=1)))
    return float(np.mean(np.sum(resid**2, axis=0)) / denom) if denom > 0 else float("nan")


def _mc_nmse(cfg, pcfg, equilibria, continuous: bool) -> float:
    reps = [empirical_nmse(cfg, pcfg, equilibria, continuous, r) for r in range(cfg.mc["replicates"])]
    return float(np.mean(reps))


# ---------------------------------------------------------------- surface

SURFACE_HEADER = [
    "d", "eta", "gamma", "family", "N", "lambda", "x0",
    "nmse_model", "nmse_discrete_mc", "nmse_continuous_mc", "flag",
]


def surface_point(args) -> dict:
    cfg, d, eta, use_mc = args
    row = {
        "d": d, "eta": eta, "gamma": cfg.gamma, "family": cfg.family, "N": cfg.N,
        "lambda": cfg.lam, "x0": float("nan"), "nmse_model": float("nan"),
        "nmse_discrete_mc": float("nan"), "nmse_continuous_mc": float("nan"), "flag": "ok",
    }
    try:
        # one mask for the whole surface, as in a single physical device
        rc = ReservoirConfig(cfg.N, d, cfg.kernel(eta=eta), cfg.mask(cfg.N, 0))
        eq = select_equilibrium(rc.kernel)
        row["x0"] = eq.x0
        provider = cfg.provider()
        model = model_moments(rc, [eq.x0], cfg.R, provider)
        row["nmse_model"] = characteristic_error(model, cfg.task, provider, cfg.lam).nmse
        if use_mc:
            row["nmse_discrete_mc"] = _mc_nmse(cfg, [rc], [eq], continuous=False)
            if cfg.mc.get("continuous", True):
                row["nmse_continuous_mc"] = _mc_nmse(cfg, [rc], [eq], continuous=True)
    except TDRError as exc:
        row["flag"] = failure_flag(exc)
    return row


def cmd_surface(cfg: ExperimentConfig, use_mc: bool | None = None) -> list[dict]:
    use_mc = cfg.mc.get("enabled", True) if use_mc is None else use_mc
    items = [(cfg, float(d), float(eta), use_mc) for d in cfg.d_grid for eta in cfg.eta_grid]
    return run_pool(surface_point, items, cfg.workers)


# ---------------------------------------------------------------- capacity

CAPACITY_HEADER = [
    "d", "eta", "gamma", "family", "N", "lambda", "x0",
    "mse_char", "trace_cov_yy", "nmse_model", "capacity", "nmse_discrete_mc", "flag",
]


def cmd_capacity(cfg: ExperimentConfig, use_mc: bool | None = None) -> list[dict]:
    use_mc = cfg.mc.get("enabled", True) if use_mc is None else use_mc
    row = {
        "d": cfg.d, "eta": cfg.eta, "gamma": cfg.gamma, "family": cfg.family, "N": cfg.N,
        "lambda": cfg.lam, "x0": float("nan"), "mse_char": float("nan"),
        "trace_cov_yy": float("nan"), "nmse_model": float("nan"), "capacity": float("nan"),
        "nmse_discrete_mc": float("nan"), "flag": "ok",
    }
    try:
        rc = ReservoirConfig(cfg.N, cfg.d, cfg.kernel(), cfg.mask(cfg.N, 0))
        eq = select_equilibrium(rc.kernel)
        row["x0"] = eq.x0
        provider = cfg.provider()
        report = characteristic_error(model_moments(rc, [eq.x0], cfg.R, provider),
                                      cfg.task, provider, cfg.lam)
        row.update(mse_char=report.mse_char, trace_cov_yy=report.trace_cov_yy,
                   nmse_model=report.nmse, capacity=report.capacity)
        if use_mc:
            row["nmse_discrete_mc"] = _mc_nmse(cfg, [rc], [eq], continuous=False)
    except TDRError as exc:
        row["flag"] = failure_flag(exc)
    return [row]


# ---------------------------------------------------------------- robustness (parameters)

ROBUST_PARAMS_HEADER = [
    "pool_size", "neurons", "draw_index", "nmse_model", "flag", "d", "eta", "gamma", "lambda",
]


def _draw_pool(cfg: ExperimentConfig, pool: int, neurons: int, draw: int):
    rb = cfg.robust
    rng = keyed_rng(cfg.seed, DRAW, pool, neurons, draw)
    members = []
    for N in pool_sizes(neurons, pool):
        d = rng.uniform(*rb["d"])
        while d <= 0.0:  # the separation interval is open at zero
            d = rng.uniform(*rb["d"])
        eta = rng.uniform(*rb["eta"])
        gamma = rng.uniform(*rb["gamma"])
        mask = rng.uniform(*rb["mask"], (N, cfg.n))
        members.append(ReservoirConfig(N, d, cfg.kernel(eta=eta, gamma=gamma), mask))
    return ParallelConfig(tuple(members))


def robust_params_point(args) -> dict:
    cfg, pool, neurons, draw = args
    pcfg = _draw_pool(cfg, pool, neurons, draw)
    row = {
        "pool_size": pool, "neurons": neurons, "draw_index": draw, "nmse_model": float("nan"),
        "flag": "ok", "d": [c.d for c in pcfg], "eta": [c.kernel.eta for c in pcfg],
        "gamma": [c.kernel.gamma for c in pcfg], "lambda": cfg.lam,
    }
    try:
        provider = cfg.provider()
        model = model_moments(pcfg, None, cfg.R, provider)
        row["nmse_model"] = characteristic_error(model, cfg.task, provider, cfg.lam).nmse
    except TDRError as exc:
        row["flag"] = failure_flag(exc)
    return row


def _configurations(cfg: ExperimentConfig):
    return [(p, n) for p in cfg.robust["pools"] for n in cfg.robust["neurons"] if p <= n]


def cmd_robust_params(cfg: ExperimentConfig) -> list[dict]:
    draws = int(cfg.robust.get("draws", 1000))
    items = [(cfg, p, n, k) for p, n in _configurations(cfg) for k in range(draws)]
    return run_pool(robust_params_point, items, cfg.workers)


# ---------------------------------------------------------------- optimization

OPTIMIZE_HEADER = [
    "pool_size", "neurons", "member", "N", "d", "eta", "gamma", "mask_seed", "capacity", "flag",
]


def _member_mask(cfg: ExperimentConfig, pool: int, neurons: int, member: int, N: int):
    seed = keyed_seed(cfg.seed, MASK, pool, neurons, member)
    if cfg.mask_values is not None:
        return seed, cfg.mask(N)
    lo, hi = cfg.mask_range
    return seed, np.random.default_rng(seed).uniform(lo, hi, (N, cfg.n))


def _pool_capacity(cfg, sizes, masks, params, task, provider) -> float:
    pcfg = ParallelConfig(tuple(
        ReservoirConfig(N, d, cfg.kernel(eta=eta, gamma=gamma), mask)
        for N, mask, (d, eta, gamma) in zip(sizes, masks, params)
    ))
    try:
        cap = characteristic_error(model_moments(pcfg, None, cfg.R, provider), task,
                                   provider, cfg.lam).capacity
    except TDRError:
        return -math.inf
    return cap if math.isfinite(cap) else -math.inf


def optimize_configuration(args) -> list[dict]:
    """Grid search over shared (d, eta, gamma), then per-member refinement.

    Points are visited in ascending (d, eta, gamma) order and only a strict
    improvement replaces the incumbent, which breaks ties toward smaller d,
    then eta, then gamma.
    """
    cfg, pool, neurons = args
    provider = cfg.provider()
    sizes = pool_sizes(neurons, pool)
    seeds, masks = zip(*(_member_mask(cfg, pool, neurons, j, N) for j, N in enumerate(sizes)))
    grid = list(itertools.product(
        np.sort(cfg.d_grid), np.sort(cfg.eta_grid), np.sort(cfg.gamma_grid)
    ))
    best, best_cap = None, -math.inf
    for point in grid:
        cap = _pool_capacity(cfg, sizes, masks, [point] * pool, cfg.task, provider)
        if cap > best_cap:
            best, best_cap = point, cap
    if best is None:
        return [{
            "pool_size": pool, "neurons": neurons, "member": j, "N": N,
            "d": float("nan"), "eta": float("nan"), "gamma": float("nan"),
            "mask_seed": seeds[j], "capacity": float("nan"), "flag": "infeasible",
        } for j, N in enumerate(sizes)]
    params = [best] * pool
    if pool > 1 and cfg.robust.get("refine_members", True):
        for _ in range(int(cfg.robust.get("refine_sweeps", 2))):
            improved = False
            for j in range(pool):
                for point in grid:
                    trial = params[:j] + [point] + params[j + 1:]
                    cap = _pool_capacity(cfg, sizes, masks, trial, cfg.task, provider)
                    if cap > best_cap:
                        params, best_cap, improved = trial, cap, True
            if not improved:
                break
    return [{
        "pool_size": pool, "neurons": neurons, "member": j, "N": N,
        "d": float(params[j][0]), "eta": float(params[j][1]), "gamma": float(params[j][2]),
        "mask_seed": seeds[j], "capacity": best_cap, "flag": "ok",
    } for j, N in enumerate(sizes)]


def cmd_optimize(cfg: ExperimentConfig) -> list[dict]:
    items = [(cfg, p, n) for p, n in _configurations(cfg)]
    return [row for rows in run_pool(optimize_configuration, items, cfg.workers) for row in rows]


# ---------------------------------------------------------------- robustness (task)

ROBUST_TASK_HEADER = [
    "pool_size", "neurons", "task_index", "nmse_model", "flag", "d", "eta", "gamma",
    "lambda", "task_weights",
]


def random_diag_tasks(cfg: ExperimentConfig) -> list[tuple[np.ndarray, QuadraticTask]]:
    """Diagonal h-lag quadratic tasks shared by every configuration."""
    rb = cfg.robust
    h = int(rb.get("task_h", 9))
    m = (h + 1) * cfg.n
    lo, hi = rb.get("task_weights", (-10.0, 10.0))
    out = []
    for k in range(int(rb.get("tasks", 1000))):
        w = keyed_rng(cfg.seed, TASK, k).uniform(lo, hi, m)
        out.append((w, quadratic_from_matrix(np.diag(w), h, cfg.n)))
    return out


def _optimized_params(cfg: ExperimentConfig, pool: int, neurons: int):
    rows = [r for r in cfg.optimized
            if int(r.get("pool_size", r.get("pool", -1))) == pool and int(r["neurons"]) == neurons]
    if rows:
        rows = sorted(rows, key=lambda r: int(r.get("member", 0)))
        if len(rows) != pool:
            raise ConfigError(f"optimized parameters for pool {pool}/{neurons} need {pool} members")
        return rows
    return optimize_configuration((cfg, pool, neurons))


def robust_task_configuration(args) -> list[dict]:
    cfg, pool, neurons, tasks = args
    params = _optimized_params(cfg, pool, neurons)
    sizes = pool_sizes(neurons, pool)
    base = {"pool_size": pool, "neurons": neurons, "lambda": cfg.lam,
            "d": [float(r["d"]) for r in params], "eta": [float(r["eta"]) for r in params],
            "gamma": [float(r["gamma"]) for r in params]}
    if any(r.get("flag") == "infeasible" or not math.isfinite(float(r["d"])) for r in params):
        return [dict(base, task_index=k, nmse_model=float("nan"), flag="infeasible", task_weights=w)
                for k, (w, _) in enumerate(tasks)]
    provider = cfg.provider()
    try:
        members = []
        for j, (N, r) in enumerate(zip(sizes, params)):
            if "mask_seed" in r:
                lo, hi = cfg.mask_range
                mask = np.random.default_rng(int(r["mask_seed"])).uniform(lo, hi, (N, cfg.n))
            else:
                mask = _member_mask(cfg, pool, neurons, j, N)[1]
            members.append(ReservoirConfig(
                N, float(r["d"]), cfg.kernel(eta=float(r["eta"]), gamma=float(r["gamma"])), mask
            ))
        model = model_moments(ParallelConfig(tuple(members)), None, cfg.R, provider)
    except TDRError as exc:
        flag = failure_flag(exc)
        return [dict(base, task_index=k, nmse_model=float("nan"), flag=flag, task_weights=w)
                for k, (w, _) in enumerate(tasks)]
    rows = []
    for k, (w, task) in enumerate(tasks):
        row = dict(base, task_index=k, task_weights=w, nmse_model=float("nan"), flag="ok")
        try:
            if not np.trace(task_output_covariance(task, provider)) > 0:
                row["flag"] = "degenerate"
            else:
                row["nmse_model"] = characteristic_error(model, task, provider, cfg.lam).nmse
        except TDRError as exc:
            row["flag"] = failure_flag(exc)
        rows.append(row)
    return rows


def cmd_robust_task(cfg: ExperimentConfig) -> list[dict]:
    tasks = random_diag_tasks(cfg)
    items = [(cfg, p, n, tasks) for p, n in _configurations(cfg)]
    return [row for rows in run_pool(robust_task_configuration, items, cfg.workers) for row in rows]


def numerical_failure_fraction(rows: list[dict]) -> float:
    if not rows:
        return 0.0
    return sum(str(r.get("flag", "")).startswith("numerical") for r in rows) / len(rows)
