"""Geodesic pulse engineering.

Each iteration computes the geodesic from the current total unitary to the
target, finds the control update whose first-order effect best matches the
geodesic tangent (a real least-squares problem over the Jacobian), and line
searches along it.  When the line search cannot raise the fidelity, a random
restricted step orthogonal to the geodesic vector is taken instead.
"""

from __future__ import annotations

import csv
import io
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .derivatives import JacobianSet, full_jacobian
from .linalg import check_unitary, dagger, golden_section_max, logm_unitary_principal, lstsq_min_norm
from .model import ControlProblem, PulseSequence, evolve, unitary_fidelity
from .pauli import PauliBasis, RestrictionSet, vectorize_tangent

TRACE_SCHEMA = "# schema=geopulse.trace/1"
TRACE_HEADER = ["iteration", "infidelity", "step_kind", "step_size", "elapsed_ms"]

STEP_KINDS = ("init", "geodesic", "gram_schmidt", "adam", "newton", "rfo")

# A line search counts as progress only above this fidelity gain.
IMPROVEMENT_TOL = 1e-14
# Gram-Schmidt redraws before giving up on orthogonality.
MAX_REDRAWS = 32


@dataclass(frozen=True)
class GeopeConfig:
    eta_max: float
    gs_factor: float = 1.2
    epsilon: float = 1e-9
    max_iters: int = 200
    init_scale: float = 1.0
    seed: int = 0
    line_tol: float = 1e-6  # golden-section bracket width, relative to eta_max

    def __post_init__(self):
        if not self.eta_max > 0:
            raise ValueError("eta_max must be positive")
        if not self.gs_factor > 0:
            raise ValueError("gs_factor must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.init_scale < 0:
            raise ValueError("init_scale must be non-negative")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    infidelity: float
    step_kind: str
    step_size: float
    elapsed: float  # seconds since the run started


@dataclass
class OptRunTrace:
    """Per-iteration history of one optimisation run.

    Record 0 is the initial point.  ``solved_at`` is the first iteration
    whose infidelity dropped below ``epsilon``.
    """

    epsilon: float
    records: list[TraceRecord] = field(default_factory=list)
    status: str = "running"
    solved_at: int | None = None

    def append(self, record: TraceRecord) -> None:
        if not 0.0 <= record.infidelity <= 1.0 + 1e-12:
            raise ValueError(f"infidelity {record.infidelity} outside [0, 1]")
        if record.step_kind not in STEP_KINDS:
            raise ValueError(f"unknown step kind {record.step_kind!r}")
        self.records.append(record)
        if self.solved_at is None and record.infidelity < self.epsilon:
            self.solved_at = record.iteration

    def finish(self) -> None:
        self.status = "solved" if self.records and self.records[-1].infidelity < self.epsilon else "max_iters"

    @property
    def infidelities(self) -> np.ndarray:
        return np.array([r.infidelity for r in self.records])

    @property
    def final_infidelity(self) -> float:
        return self.records[-1].infidelity

    @property
    def iterations(self) -> int:
        return self.records[-1].iteration if self.records else 0

    def to_csv(self, timing: bool = False) -> str:
        """CSV text; elapsed times are written as 0 unless ``timing`` is set
        so that reruns with the same seed produce identical files."""
        buf = io.StringIO()
        buf.write(TRACE_SCHEMA + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in self.records:
            ms = round(1000.0 * r.elapsed, 3) if timing else 0
            w.writerow([r.iteration, repr(float(r.infidelity)), r.step_kind, repr(float(r.step_size)), ms])
        return buf.getvalue()

    def write_csv(self, path, timing: bool = False) -> None:
        Path(path).write_text(self.to_csv(timing))


class _Recorder:
    """Shared bookkeeping for the optimiser loops."""

    def __init__(self, epsilon: float, callback: Callable[[TraceRecord], None] | None):
        self.trace = OptRunTrace(epsilon)
        self.callback = callback
        self.start = time.perf_counter()

    def __call__(self, iteration: int, infid: float, kind: str, size: float) -> bool:
        rec = TraceRecord(iteration, float(min(max(infid, 0.0), 1.0)), kind, float(size),
                          time.perf_counter() - self.start)
        self.trace.append(rec)
        if self.callback is not None:
            self.callback(rec)
        return rec.infidelity < self.trace.epsilon


def initial_controls(problem: ControlProblem, n_layers: int, init_scale: float, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-init_scale, init_scale, size=(n_layers, problem.control_count))


def geodesic_generator(u_g: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Traceless Hermitian ``Gamma`` with ``U_G exp(i Gamma) = V`` up to phase,
    and the coefficient vector of ``U_G Gamma``."""
    u_g = np.asarray(u_g, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    check_unitary(u_g, what="U_G")
    check_unitary(v, what="target")
    dim = u_g.shape[0]
    gamma_mat = logm_unitary_principal(dagger(u_g) @ v)
    gamma_mat = gamma_mat - (np.trace(gamma_mat).real / dim) * np.eye(dim)
    basis = PauliBasis(dim.bit_length() - 1)
    return gamma_mat, vectorize_tangent(u_g @ gamma_mat, basis)


def _stack(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag], axis=-1)


def least_squares_update(jacobians: JacobianSet, gamma: np.ndarray) -> tuple[np.ndarray, float]:
    """Real ``(L, K)`` update minimising ``|sum dphi_{lk} j_{lk} - gamma|^2``
    and that minimal squared residual."""
    vec = jacobians.vectorised
    n_layers, n_ctrl = vec.shape[:2]
    a = _stack(vec.reshape(n_layers * n_ctrl, -1)).T
    if not np.any(a):
        raise ValueError("all Jacobian columns vanish")
    b = _stack(np.asarray(gamma))
    step = lstsq_min_norm(a, b)
    resid = float(np.sum((a @ step - b) ** 2))
    return step.reshape(n_layers, n_ctrl), resid


def solve_update_direction(jacobians: JacobianSet, gamma: np.ndarray) -> np.ndarray:
    """Unit-norm least-squares update direction; all zeros when the
    controls cannot reduce the residual at all."""
    step, _ = least_squares_update(jacobians, gamma)
    norm = np.linalg.norm(step)
    if norm == 0.0:
        return step
    return step / norm


def gram_schmidt_escape(
    gamma: np.ndarray,
    restriction: RestrictionSet,
    n_layers: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Random restricted ``(L, K)`` direction with the geodesic part removed.

    Each layer draws ``r`` uniform in ``[-1, 1]`` on the restricted words and
    subtracts its projection on the restricted real part of ``gamma``.  The
    result is orthogonal to ``gamma`` once controls are embedded as real
    coefficient vectors.
    """
    gamma = np.asarray(gamma)
    g = np.real(gamma[list(restriction.indices)])
    gg = float(g @ g)
    k = len(restriction)
    for _ in range(MAX_REDRAWS):
        r = rng.uniform(-1.0, 1.0, size=(n_layers, k))
        d = r - np.outer(r @ g / gg, g) if gg > 0 else r
        norm = np.linalg.norm(d)
        if norm > 1e-8 * np.linalg.norm(r):
            return d / norm
    warnings.warn("restricted controls span only the geodesic direction; escape step is not orthogonal",
                  RuntimeWarning, stacklevel=2)
    return r / np.linalg.norm(r)


def run(
    problem: ControlProblem,
    config: GeopeConfig,
    n_layers: int,
    initial: np.ndarray | None = None,
    callback: Callable[[TraceRecord], None] | None = None,
) -> tuple[PulseSequence, OptRunTrace]:
    rng = np.random.default_rng(config.seed)
    if initial is None:
        phi = initial_controls(problem, n_layers, config.init_scale, rng)
    else:
        phi = np.array(initial, dtype=np.float64)
        if phi.shape != (n_layers, problem.control_count):
            raise ValueError("initial controls have the wrong shape")
    v = problem.target
    record = _Recorder(config.epsilon, callback)
    fid = unitary_fidelity(evolve(problem, phi), v)
    done = record(0, 1.0 - fid, "init", 0.0)
    tol = config.line_tol * config.eta_max
    gs_size = config.gs_factor * config.eta_max

    for it in range(1, config.max_iters + 1):
        if done:
            break
        jac = full_jacobian(problem, phi)
        _, gamma = geodesic_generator(jac.unitary, v)
        direction = solve_update_direction(jac, gamma)
        moved = False
        if np.any(direction):
            def f(eta, direction=direction):
                return unitary_fidelity(evolve(problem, phi + eta * direction), v)

            eta, best = golden_section_max(f, 0.0, config.eta_max, tol)
            if best > fid + IMPROVEMENT_TOL:
                phi = phi + eta * direction
                fid = best
                moved = True
                done = record(it, 1.0 - fid, "geodesic", eta)
        if not moved:
            phi = phi + gs_size * gram_schmidt_escape(gamma, problem.restriction, n_layers, rng)
            fid = unitary_fidelity(evolve(problem, phi), v)
            done = record(it, 1.0 - fid, "gram_schmidt", gs_size)

    record.trace.finish()
    return PulseSequence(phi), record.trace
