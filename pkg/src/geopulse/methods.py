"""Uniform entry point for the four optimisers, keyed by name.

Every method has one scalar hyperparameter: the maximum line-search step
for ``geope``, the learning rate for ``grape-adam``, the spectrum shift for
``grape-nr`` and the target condition number for ``grape-rfo``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import geope, grape
from .model import ControlProblem, PulseSequence

METHODS = ("geope", "grape-adam", "grape-nr", "grape-rfo")

HYPERPARAMETER = {
    "geope": "eta_max",
    "grape-adam": "learning_rate",
    "grape-nr": "delta",
    "grape-rfo": "kappa",
}


@dataclass(frozen=True)
class RunSpec:
    """Everything besides the problem that determines one seeded run."""

    method: str
    hyperparameter: float
    n_layers: int
    max_iters: int = 200
    epsilon: float = 1e-9
    init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")

    def with_seed(self, seed: int) -> "RunSpec":
        return RunSpec(self.method, self.hyperparameter, self.n_layers, self.max_iters,
                       self.epsilon, self.init_scale, seed)

    def config(self):
        common = dict(epsilon=self.epsilon, max_iters=self.max_iters, init_scale=self.init_scale, seed=self.seed)
        p = self.hyperparameter
        if self.method == "geope":
            return geope.GeopeConfig(eta_max=p, **common)
        if self.method == "grape-adam":
            return grape.AdamConfig(learning_rate=p, **common)
        if self.method == "grape-nr":
            return grape.NewtonConfig(delta=p, **common)
        return grape.RfoConfig(kappa=p, **common)


_RUNNERS: dict[str, Callable] = {
    "geope": geope.run,
    "grape-adam": grape.adam_run,
    "grape-nr": grape.newton_raphson_run,
    "grape-rfo": grape.rfo_run,
}


def run_method(problem: ControlProblem, spec: RunSpec, callback=None) -> tuple[PulseSequence, geope.OptRunTrace]:
    return _RUNNERS[spec.method](problem, spec.config(), spec.n_layers, callback=callback)
