"""One-dimensional Bayesian hyperparameter search.

A Gaussian-process surrogate with a squared-exponential kernel models the
mean cumulative infidelity ``C(p)``; new points minimise the lower
confidence bound ``mu - kappa * sigma`` over a fixed grid.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg

from .geope import OptRunTrace
from .methods import RunSpec, run_method
from .model import ControlProblem

OBSERVATION_SCHEMA = "# schema=geopulse.observations/1"
OBSERVATION_HEADER = ["observation", "p", "C", "samples", "seed"]

GRID_POINTS = 512
_LENGTH_GRID = np.logspace(-2.0, 0.5, 26)
_SIGNAL_GRID = np.logspace(-1.0, 1.0, 9)


def cumulative_infidelity(trace: OptRunTrace, cap: int) -> float:
    """Sum of infidelities after iterations ``1..M`` where ``M`` is the
    solving iteration, or ``cap`` for unsolved runs."""
    stop = cap if trace.solved_at is None else min(trace.solved_at, cap)
    return float(sum(r.infidelity for r in trace.records if 1 <= r.iteration <= stop))


def _one_sample(args) -> float:
    problem, spec, cap = args
    _, trace = run_method(problem, spec)
    return cumulative_infidelity(trace, cap)


def mean_cumulative_infidelity(
    problem: ControlProblem,
    spec: RunSpec,
    samples: int,
    cap: int = 200,
    workers: int = 1,
) -> float:
    """Average cumulative infidelity over ``samples`` runs seeded
    ``spec.seed + a``."""
    if samples < 1:
        raise ValueError("need at least one sample")
    base = RunSpec(spec.method, spec.hyperparameter, spec.n_layers, cap, spec.epsilon, spec.init_scale, spec.seed)
    jobs = [(problem, base.with_seed(spec.seed + a), cap) for a in range(samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_one_sample, jobs))
    else:
        values = [_one_sample(j) for j in jobs]
    return float(np.mean(values))


def _se_kernel(a: np.ndarray, b: np.ndarray, length: float, signal: float) -> np.ndarray:
    d = a[:, None] - b[None, :]
    return signal * np.exp(-0.5 * (d / length) ** 2)


@dataclass
class GpSurrogate:
    """GP regression on ``[lo, hi]`` with inputs rescaled to the unit interval
    and outputs standardised.  ``alpha`` is the noise variance added to the
    kernel diagonal in standardised units."""

    bounds: tuple[float, float]
    alpha: float = 0.02
    xs: list[float] = field(default_factory=list)
    ys: list[float] = field(default_factory=list)
    length: float = 0.2
    signal: float = 1.0

    def __post_init__(self):
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError("bounds must satisfy lo < hi")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")

    def _unit(self, p) -> np.ndarray:
        lo, hi = self.bounds
        return (np.asarray(p, dtype=np.float64) - lo) / (hi - lo)

    def add(self, p: float, y: float) -> None:
        self.xs.append(float(p))
        self.ys.append(float(y))
        self._fit()

    def _standardised(self):
        y = np.asarray(self.ys)
        mean = float(y.mean())
        std = float(y.std())
        if std == 0.0:
            std = 1.0
        return (y - mean) / std, mean, std

    def _factor(self, length, signal):
        x = self._unit(self.xs)
        k = _se_kernel(x, x, length, signal) + (self.alpha + 1e-10) * np.eye(len(x))
        return scipy.linalg.cho_factor(k, lower=True)

    def _fit(self) -> None:
        z, _, _ = self._standardised()
        best = None
        for length in _LENGTH_GRID:
            for signal in _SIGNAL_GRID:
                c, low = self._factor(length, signal)
                w = scipy.linalg.cho_solve((c, low), z)
                nll = 0.5 * z @ w + np.log(np.diag(c)).sum()
                if best is None or nll < best[0]:
                    best = (nll, length, signal)
        _, self.length, self.signal = best

    def predict(self, p) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation in objective units."""
        if not self.xs:
            raise ValueError("surrogate has no observations")
        p = np.atleast_1d(np.asarray(p, dtype=np.float64))
        z, mean, std = self._standardised()
        c, low = self._factor(self.length, self.signal)
        ks = _se_kernel(self._unit(p), self._unit(self.xs), self.length, self.signal)
        mu = ks @ scipy.linalg.cho_solve((c, low), z)
        v = scipy.linalg.solve_triangular(c, ks.T, lower=True)
        var = np.maximum(self.signal - np.sum(v * v, axis=0), 0.0)
        return mean + std * mu, std * np.sqrt(var)


def acquisition_grid(bounds: tuple[float, float]) -> np.ndarray:
    return np.linspace(bounds[0], bounds[1], GRID_POINTS)


def ucb_select(surrogate: GpSurrogate, bounds: tuple[float, float], kappa_bo: float) -> float:
    """Grid point minimising ``mu - kappa_bo * sigma`` (first on ties)."""
    grid = acquisition_grid(bounds)
    mu, sigma = surrogate.predict(grid)
    return float(grid[int(np.argmin(mu - kappa_bo * sigma))])


@dataclass(frozen=True)
class SearchConfig:
    bounds: tuple[float, float]
    n0: int = 5
    kappa_bo: float = 5.0
    alpha_bo: float = 0.02
    samples: int = 50
    cap: int = 200
    budget: int = 25
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError("bounds must satisfy lo < hi")
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1")
        if self.budget < self.n0:
            raise ValueError("budget must be at least n0")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


@dataclass(frozen=True)
class Observation:
    index: int
    p: float
    value: float
    samples: int
    seed: int


@dataclass
class SearchResult:
    best_p: float
    best_value: float
    observations: list[Observation]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(OBSERVATION_SCHEMA + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(OBSERVATION_HEADER)
        for o in self.observations:
            w.writerow([o.index, repr(o.p), repr(o.value), o.samples, o.seed])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())


def search(objective: Callable[[float], float], config: SearchConfig) -> SearchResult:
    """Minimise ``objective`` over ``config.bounds``.

    ``n0`` uniform draws seed the surrogate; the remaining budget goes to
    UCB-selected points.  Returns the best observation seen.
    """
    rng = np.random.default_rng(config.seed)
    lo, hi = config.bounds
    gp = GpSurrogate(config.bounds, alpha=config.alpha_bo)
    obs: list[Observation] = []
    for i in range(config.budget):
        p = float(rng.uniform(lo, hi)) if i < config.n0 else ucb_select(gp, config.bounds, config.kappa_bo)
        value = float(objective(p))
        gp.add(p, value)
        obs.append(Observation(i, p, value, config.samples, config.seed))
    best = min(obs, key=lambda o: o.value)
    return SearchResult(best.p, best.value, obs)


def method_objective(problem: ControlProblem, spec: RunSpec, config: SearchConfig, workers: int = 1):
    """``p -> C(p)`` with common random numbers: every observation reuses the
    seeds ``config.seed + a``."""

    def objective(p: float) -> float:
        trial = RunSpec(spec.method, p, spec.n_layers, config.cap, spec.epsilon, spec.init_scale, config.seed)
        return mean_cumulative_infidelity(problem, trial, config.samples, config.cap, workers)

    return objective


def search_method(problem: ControlProblem, spec: RunSpec, config: SearchConfig, workers: int = 1) -> SearchResult:
    return search(method_objective(problem, spec, config, workers), config)
