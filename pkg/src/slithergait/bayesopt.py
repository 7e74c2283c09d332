"""Gaussian-process Bayesian optimization of the gait parameters.

For each fixed temporal frequency omega, minimizes the averaged power per
velocity over (y, amplitude, lambda) inside the grid-search bounds: 10
seeded space-filling exploration samples, then 100 exploitation rounds of
fit -> expected-improvement argmax -> evaluate. The surrogate is a Matern-5/2
GP on inputs normalized to the unit cube, with hyperparameters set by
multi-start gradient-free marginal-likelihood maximization.

The optimizer core is objective-agnostic (``optimize_unit_cube``) so it can
be exercised on analytic benchmarks without the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.stats import norm, qmc

from .dynamics import RobotConfig
from .errors import SimulationDiverged, ValidationError
from .gait import GaitParams
from .metrics import EvalResult
from .search import DEFAULT_STEPS, DEFAULT_WARMUP, GridSpec, evaluate_gait

# (y, amplitude_deg, lambda_deg) box, matching the grid-search table
DEFAULT_BOUNDS = ((0.1, 0.4), (40.0, 180.0), (40.0, 120.0))

_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

# log-space box for (lengthscales, signal var, noise var) on standardized data
_LOG_LS_BOUNDS = (math.log(1e-2), math.log(10.0))
_LOG_SV_BOUNDS = (math.log(1e-3), math.log(1e3))
_LOG_NV_BOUNDS = (math.log(1e-8), math.log(1.0))


def matern52(a: np.ndarray, b: np.ndarray, lengthscales: np.ndarray) -> np.ndarray:
    """Matern-5/2 correlation matrix between row sets a and b."""
    diff = (a[:, None, :] - b[None, :, :]) / lengthscales
    r = np.sqrt(np.maximum(np.sum(diff * diff, axis=-1), 0.0))
    sr = math.sqrt(5.0) * r
    return (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)


@dataclass
class GpModel:
    """Fitted GP posterior over standardized observations on the unit cube."""

    x: np.ndarray  # (n, d) inputs in [0, 1]^d
    y: np.ndarray  # (n,) raw objective values
    log_lengthscales: np.ndarray  # (d,)
    log_signal_var: float
    log_noise_var: float
    y_mean: float
    y_std: float
    _chol: tuple = field(repr=False, default=None)
    _alpha: np.ndarray = field(repr=False, default=None)

    @property
    def lengthscales(self) -> np.ndarray:
        return np.exp(self.log_lengthscales)

    @property
    def signal_variance(self) -> float:
        return math.exp(self.log_signal_var)

    @property
    def noise_variance(self) -> float:
        return math.exp(self.log_noise_var)

    def _standardized(self) -> np.ndarray:
        return (self.y - self.y_mean) / self.y_std

    def _factorize(self):
        if self._chol is None:
            k = self.signal_variance * matern52(self.x, self.x, self.lengthscales)
            k[np.diag_indices_from(k)] += self.noise_variance
            self._chol = _chol_with_jitter(k)
            self._alpha = cho_solve(self._chol, self._standardized())
        return self._chol, self._alpha

    def predict(self, query) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance (original scale) at query points."""
        query = np.atleast_2d(np.asarray(query, dtype=float))
        chol, alpha = self._factorize()
        ks = self.signal_variance * matern52(query, self.x, self.lengthscales)
        mu = ks @ alpha
        v = cho_solve(chol, ks.T)
        var = self.signal_variance - np.einsum("ij,ji->i", ks, v)
        var = np.maximum(var, 0.0)
        return mu * self.y_std + self.y_mean, var * self.y_std**2


def _chol_with_jitter(k: np.ndarray):
    for jitter in _JITTERS:
        try:
            kj = k if jitter == 0.0 else k + jitter * np.eye(k.shape[0])
            return cho_factor(kj, lower=True)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("kernel matrix singular even with 1e-4 jitter")


def _neg_log_marginal_likelihood(params: np.ndarray, x: np.ndarray, ys: np.ndarray) -> float:
    d = x.shape[1]
    log_ls, log_sv, log_nv = params[:d], params[d], params[d + 1]
    if (
        np.any(log_ls < _LOG_LS_BOUNDS[0])
        or np.any(log_ls > _LOG_LS_BOUNDS[1])
        or not _LOG_SV_BOUNDS[0] <= log_sv <= _LOG_SV_BOUNDS[1]
        or not _LOG_NV_BOUNDS[0] <= log_nv <= _LOG_NV_BOUNDS[1]
    ):
        return np.inf
    k = math.exp(log_sv) * matern52(x, x, np.exp(log_ls))
    k[np.diag_indices_from(k)] += math.exp(log_nv)
    try:
        chol = _chol_with_jitter(k)
    except np.linalg.LinAlgError:
        return np.inf
    alpha = cho_solve(chol, ys)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    return float(0.5 * ys @ alpha + 0.5 * logdet + 0.5 * len(ys) * math.log(2 * math.pi))


def gp_fit(x, y, rng=None, n_starts: int = 3, max_iter: int = 150) -> GpModel:
    """Fit kernel hyperparameters by multi-start Nelder-Mead on the NLML.

    Inputs must already be normalized to the unit cube. Observations are
    standardized internally so the hyperparameter box is scale-free.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(y) < 2:
        raise ValidationError(f"gp_fit needs at least 2 observations, got {len(y)}")
    if x.shape[0] != len(y):
        raise ValidationError(f"gp_fit got {x.shape[0]} inputs but {len(y)} observations")
    rng = np.random.default_rng(rng)

    y_mean = float(np.mean(y))
    y_std = float(np.std(y))
    if y_std < 1e-12:
        y_std = 1.0
    ys = (y - y_mean) / y_std

    d = x.shape[1]
    base = np.concatenate([np.full(d, math.log(0.3)), [0.0, math.log(1e-4)]])
    starts = [base]
    for _ in range(n_starts - 1):
        starts.append(base + rng.normal(0.0, 0.7, size=d + 2))

    best_params, best_val = base, np.inf
    for start in starts:
        res = minimize(
            _neg_log_marginal_likelihood,
            np.clip(
                start,
                [_LOG_LS_BOUNDS[0]] * d + [_LOG_SV_BOUNDS[0], _LOG_NV_BOUNDS[0]],
                [_LOG_LS_BOUNDS[1]] * d + [_LOG_SV_BOUNDS[1], _LOG_NV_BOUNDS[1]],
            ),
            args=(x, ys),
            method="Nelder-Mead",
            options={"maxiter": max_iter, "xatol": 1e-3, "fatol": 1e-4},
        )
        if res.fun < best_val:
            best_val, best_params = res.fun, res.x

    return GpModel(
        x=x,
        y=y,
        log_lengthscales=best_params[:d],
        log_signal_var=float(best_params[d]),
        log_noise_var=float(best_params[d + 1]),
        y_mean=y_mean,
        y_std=y_std,
    )


def expected_improvement(model: GpModel, query, best_so_far: float):
    """EI for minimization: expected amount the query beats the incumbent."""
    query = np.asarray(query, dtype=float)
    scalar = query.ndim == 1
    mu, var = model.predict(query)
    sigma = np.sqrt(var)
    gap = best_so_far - mu
    ei = np.where(sigma > 0, 0.0, np.maximum(gap, 0.0))
    pos = sigma > 0
    if np.any(pos):
        z = gap[pos] / sigma[pos]
        ei_pos = gap[pos] * norm.cdf(z) + sigma[pos] * norm.pdf(z)
        ei[pos] = np.maximum(ei_pos, 0.0)
    return float(ei[0]) if scalar else ei


def optimize_unit_cube(
    objective,
    dim: int,
    n_explore: int = 10,
    n_exploit: int = 100,
    seed: int = 0,
    n_candidates: int = 1024,
):
    """Core BO loop on [0, 1]^dim; returns (points, values, penalized mask).

    ``objective`` maps a point to a float; non-finite returns are recorded
    with a penalty of 10x the worst finite value seen so far, so one broken
    evaluation cannot abort a trial.
    """
    rng = np.random.default_rng(seed)
    sampler = qmc.LatinHypercube(d=dim, seed=rng)
    points: list[np.ndarray] = []
    values: list[float] = []
    penalized: list[bool] = []

    def record(pt: np.ndarray):
        raw = objective(pt)
        bad = not math.isfinite(raw)
        if bad:
            finite = [v for v, p in zip(values, penalized) if not p]
            raw = 10.0 * max(finite) if finite else 1e9
        points.append(pt)
        values.append(float(raw))
        penalized.append(bad)

    for pt in sampler.random(n=n_explore):
        record(pt)

    for _ in range(n_exploit):
        model = gp_fit(np.array(points), np.array(values), rng=rng)
        finite = [v for v, p in zip(values, penalized) if not p]
        best = min(finite) if finite else min(values)
        candidates = rng.random((n_candidates, dim))
        ei = expected_improvement(model, candidates, best)
        record(candidates[int(np.argmax(ei))])

    return np.array(points), np.array(values), np.array(penalized)


@dataclass
class BoResult:
    """One BO trial at fixed omega."""

    omega: float
    best_params: GaitParams
    best_objective: float
    history: list  # [(GaitParams, objective)] in evaluation order

    BO_CSV_SCHEMA = "bo-history"
    BO_CSV_HEADER = ("iteration", "phase") + GaitParams.CSV_HEADER + ("appv",)

    def csv_rows(self, n_explore: int = 10):
        for i, (params, value) in enumerate(self.history):
            phase = "explore" if i < n_explore else "exploit"
            yield [str(i), phase] + params.csv_row() + [repr(float(value))]


def _unnormalize(pt: np.ndarray, bounds) -> tuple[float, ...]:
    return tuple(lo + p * (hi - lo) for p, (lo, hi) in zip(pt, bounds))


def bayes_optimize(
    omega: float,
    config: RobotConfig = RobotConfig(),
    bounds=DEFAULT_BOUNDS,
    n_explore: int = 10,
    n_exploit: int = 100,
    seed: int = 0,
    steps: int = DEFAULT_STEPS,
    warmup: int = DEFAULT_WARMUP,
    objective=None,
) -> BoResult:
    """APPV minimization over (y, A, lambda) at one fixed temporal frequency.

    ``objective`` may replace the simulator-backed scoring (it receives a
    GaitParams and returns the value to minimize); used for benchmarks.
    """
    grid_omegas = GridSpec().omega_values
    if not any(abs(omega - o) < 1e-9 for o in grid_omegas):
        raise ValidationError(f"omega {omega} not one of the trial frequencies {grid_omegas}")

    if objective is None:

        def objective(params: GaitParams) -> float:
            try:
                result = evaluate_gait(params, config, steps, warmup)
            except SimulationDiverged:
                return math.inf
            return result.appv if math.isfinite(result.appv) else math.inf

    def cube_objective(pt: np.ndarray) -> float:
        y, amp, lam = _unnormalize(pt, bounds)
        return objective(GaitParams(omega=omega, y=y, amplitude_deg=amp, lambda_deg=lam))

    points, values, _ = optimize_unit_cube(cube_objective, dim=3, n_explore=n_explore, n_exploit=n_exploit, seed=seed)

    history = []
    for pt, val in zip(points, values):
        y, amp, lam = _unnormalize(pt, bounds)
        history.append((GaitParams(omega=omega, y=y, amplitude_deg=amp, lambda_deg=lam), float(val)))
    best_idx = int(np.argmin(values))
    return BoResult(
        omega=omega,
        best_params=history[best_idx][0],
        best_objective=float(values[best_idx]),
        history=history,
    )
