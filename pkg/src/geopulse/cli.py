"""Command-line experiment runner.

    geopulse solve --config exp.cfg [--seed N] [--out DIR]
    geopulse benchmark --config exp.cfg [--workers N]
    geopulse hypersearch --config exp.cfg
    geopulse export-pulses --config exp.cfg --pulses pulses.csv

Config files are flat ``key = value`` text; ``#`` starts a comment.  See
``CONFIG_KEYS`` for the accepted keys.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .geope import OptRunTrace
from .hyperopt import SearchConfig, SearchResult, search, method_objective
from .methods import METHODS, RunSpec, run_method
from .model import RYDBERG_EDGES, ControlProblem, PulseSequence, fidelity, gate_matrix, rydberg_problem

CURVE_SCHEMA = "# schema=geopulse.success_curve/1"
WIDE_SCHEMA = "# schema=geopulse.pulse_table/1"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    gate: str = "toffoli"
    qubits: int = 3
    lattice: str = "rydberg"
    j0: float = 1.0
    layers: int = 20
    method: str = "geope"
    hyperparameter: float = 1.29
    epsilon: float = 1e-9
    max_iters: int = 200
    samples: int = 100
    seed: int = 0
    init_scale: float = 1.0
    out: str = "out"
    # hyperparameter search
    bounds_lo: float = 0.1
    bounds_hi: float = 2.0
    n0: int = 5
    kappa_bo: float = 5.0
    alpha_bo: float = 0.02
    budget: int = 25
    cap: int = 200

    def __post_init__(self):
        if self.lattice != "rydberg":
            raise ConfigError(f"unknown lattice {self.lattice!r}; only 'rydberg' is available")
        if self.qubits not in RYDBERG_EDGES:
            raise ConfigError(f"no Rydberg lattice for {self.qubits} qubits; supported: {sorted(RYDBERG_EDGES)}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.layers < 1:
            raise ConfigError("layers must be >= 1")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if not self.hyperparameter > 0:
            raise ConfigError("hyperparameter must be positive")
        if not self.bounds_lo < self.bounds_hi:
            raise ConfigError("bounds_lo must be below bounds_hi")
        if self.budget < self.n0 or self.n0 < 1:
            raise ConfigError("need 1 <= n0 <= budget")
        try:
            gate_matrix(self.gate, self.qubits)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def problem(self) -> ControlProblem:
        return rydberg_problem(self.qubits, coupling_scale=self.j0, target=self.gate, epsilon=self.epsilon)

    def run_spec(self, seed: int | None = None) -> RunSpec:
        return RunSpec(self.method, self.hyperparameter, self.layers, self.max_iters, self.epsilon,
                       self.init_scale, self.seed if seed is None else seed)

    def search_config(self) -> SearchConfig:
        return SearchConfig((self.bounds_lo, self.bounds_hi), self.n0, self.kappa_bo, self.alpha_bo,
                            self.samples, self.cap, self.budget, self.seed)


CONFIG_KEYS = {f.name: f.type for f in fields(ExperimentConfig)}
_CASTS = {"int": int, "float": float, "str": str}


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        cast = _CASTS[CONFIG_KEYS[key]]
        try:
            values[key] = cast(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key} expects {CONFIG_KEYS[key]}, got {value!r}") from None
    try:
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


@dataclass(frozen=True)
class SuccessCurve:
    """Fraction of samples solved at or before each iteration."""

    fractions: np.ndarray

    @classmethod
    def from_solved(cls, solved_at: list[int | None], max_iters: int) -> "SuccessCurve":
        its = np.arange(max_iters + 1)
        hits = np.array([s for s in solved_at if s is not None], dtype=np.int64)
        counts = (hits[None, :] <= its[:, None]).sum(axis=1) if hits.size else np.zeros(its.size, dtype=np.int64)
        return cls(counts / len(solved_at))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CURVE_SCHEMA + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "success_fraction"])
        for i, f in enumerate(self.fractions):
            w.writerow([i, repr(float(f))])
        return buf.getvalue()


def _solve_one(args) -> tuple[PulseSequence, OptRunTrace]:
    problem, spec = args
    return run_method(problem, spec)


def _out_dir(cfg: ExperimentConfig, out: str | None) -> Path:
    path = Path(out if out is not None else cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_solve(cfg: ExperimentConfig, out: str | None = None, seed: int | None = None, timing: bool = False) -> int:
    problem = cfg.problem()
    spec = cfg.run_spec(seed)
    pulses, trace = run_method(problem, spec)
    dest = _out_dir(cfg, out)
    trace.write_csv(dest / f"trace_seed{spec.seed}.csv", timing)
    if trace.status == "solved":
        pulses.write_csv(dest / f"pulses_seed{spec.seed}.csv", problem)
    print(f"{cfg.method} seed={spec.seed}: {trace.status} after {trace.iterations} iterations, "
          f"infidelity {trace.final_infidelity:.3e}")
    return 0


def cmd_benchmark(cfg: ExperimentConfig, out: str | None = None, seed: int | None = None,
                  workers: int = 1, timing: bool = False) -> SuccessCurve:
    problem = cfg.problem()
    base = cfg.seed if seed is None else seed
    jobs = [(problem, cfg.run_spec(base + i)) for i in range(cfg.samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_one, jobs))
    else:
        results = [_solve_one(j) for j in jobs]
    dest = _out_dir(cfg, out)
    trace_dir = dest / "traces"
    trace_dir.mkdir(exist_ok=True)
    for (_, spec), (_, trace) in zip(jobs, results):
        trace.write_csv(trace_dir / f"trace_seed{spec.seed}.csv", timing)
    curve = SuccessCurve.from_solved([t.solved_at for _, t in results], cfg.max_iters)
    (dest / "success_curve.csv").write_text(curve.to_csv())
    print(f"{cfg.method}: {int(round(curve.fractions[-1] * cfg.samples))}/{cfg.samples} solved "
          f"within {cfg.max_iters} iterations")
    return curve


def cmd_hypersearch(cfg: ExperimentConfig, out: str | None = None, workers: int = 1,
                    objective=None) -> SearchResult:
    """Bayesian search over the method's hyperparameter; ``objective``
    replaces the optimiser-backed ``C(p)`` when given."""
    scfg = cfg.search_config()
    if objective is None:
        objective = method_objective(cfg.problem(), cfg.run_spec(), scfg, workers)
    result = search(objective, scfg)
    dest = _out_dir(cfg, out)
    result.write_csv(dest / "observations.csv")
    print(f"best {cfg.method} hyperparameter {result.best_p:.6g} with C = {result.best_value:.6g}")
    return result


def pulse_table(pulses: PulseSequence, problem: ControlProblem) -> str:
    """One row per layer, one column per controllable word."""
    buf = io.StringIO()
    buf.write(WIDE_SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["layer"] + problem.control_words)
    for l, row in enumerate(pulses.controls, 1):
        w.writerow([l] + [repr(float(x)) for x in row])
    return buf.getvalue()


def cmd_export_pulses(cfg: ExperimentConfig, pulses_path, out: str | None = None) -> float:
    problem = cfg.problem()
    pulses = PulseSequence.read_csv(pulses_path, problem)
    if pulses.control_count != problem.control_count:
        raise ConfigError("pulse file does not match the configured problem")
    fid = fidelity(problem, pulses.controls)
    dest = _out_dir(cfg, out)
    stem = Path(pulses_path).stem
    pulses.write_csv(dest / f"{stem}_export.csv", problem)
    (dest / f"{stem}_table.csv").write_text(pulse_table(pulses, problem))
    print(f"{pulses.layer_count} layers x {pulses.control_count} controls, fidelity {fid:.12f}")
    return fid


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geopulse", description="Pulse optimisation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "benchmark", "hypersearch", "export-pulses"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="parallel worker processes")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--timing", action="store_true", help="record wall-clock times in trace files")
        if name == "export-pulses":
            p.add_argument("--pulses", required=True, help="pulse CSV to re-evaluate")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.command == "solve":
            return cmd_solve(cfg, args.out, timing=args.timing)
        if args.command == "benchmark":
            cmd_benchmark(cfg, args.out, workers=args.workers, timing=args.timing)
        elif args.command == "hypersearch":
            cmd_hypersearch(cfg, args.out, workers=args.workers)
        else:
            cmd_export_pulses(cfg, args.pulses, args.out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"geopulse: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
