"""Gradient-based pulse optimisers: Adam, spectrum-shifted Newton and RFO.

All three minimise the infidelity directly over the restricted controls.
Parameters flatten layer-major, so index ``l * K + k`` addresses control
``k`` of layer ``l`` in gradients, Hessians and solves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.optimize

from .derivatives import infidelity_derivatives, infidelity_value_and_gradient
from .geope import OptRunTrace, TraceRecord, _Recorder, initial_controls
from .linalg import CholeskyError, cholesky_solve
from .model import ControlProblem, PulseSequence, infidelity

EPS = float(np.finfo(np.float64).eps)


def _check_common(epsilon: float, max_iters: int, init_scale: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if init_scale < 0:
        raise ValueError("init_scale must be non-negative")


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps_div: float = 1e-8
    epsilon: float = 1e-9
    max_iters: int = 200
    init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        _check_common(self.epsilon, self.max_iters, self.init_scale)


@dataclass(frozen=True)
class Backtracking:
    initial: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    max_halvings: int = 40

    def __post_init__(self):
        if not (self.initial > 0 and 0 < self.shrink < 1 and 0 < self.armijo_c < 1 and self.max_halvings >= 0):
            raise ValueError("invalid backtracking parameters")


@dataclass(frozen=True)
class NewtonConfig:
    delta: float
    epsilon: float = 1e-9
    max_iters: int = 200
    backtracking: Backtracking = Backtracking()
    init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError("delta must be non-negative")
        _check_common(self.epsilon, self.max_iters, self.init_scale)


@dataclass(frozen=True)
class RfoConfig:
    kappa: float
    alpha0: float = 1.0
    phi: float = 0.9
    inner_max: int = 300
    epsilon: float = 1e-9
    max_iters: int = 200
    backtracking: Backtracking = Backtracking()
    init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.kappa > 1:
            raise ValueError("kappa must exceed 1")
        if not (self.alpha0 > 0 and 0 < self.phi < 1 and self.inner_max >= 1):
            raise ValueError("invalid RFO damping parameters")
        _check_common(self.epsilon, self.max_iters, self.init_scale)


def _start(problem, n_layers, config, initial):
    rng = np.random.default_rng(config.seed)
    if initial is None:
        return initial_controls(problem, n_layers, config.init_scale, rng)
    phi = np.array(initial, dtype=np.float64)
    if phi.shape != (n_layers, problem.control_count):
        raise ValueError("initial controls have the wrong shape")
    return phi


def adam_run(
    problem: ControlProblem,
    config: AdamConfig,
    n_layers: int,
    initial: np.ndarray | None = None,
    callback: Callable[[TraceRecord], None] | None = None,
) -> tuple[PulseSequence, OptRunTrace]:
    phi = _start(problem, n_layers, config, initial)
    record = _Recorder(config.epsilon, callback)
    value, grad = infidelity_value_and_gradient(problem, phi)
    done = record(0, value, "init", 0.0)
    mu = np.zeros_like(phi)
    nu = np.zeros_like(phi)
    b1, b2 = config.beta1, config.beta2
    for t in range(1, config.max_iters + 1):
        if done:
            break
        mu = b1 * mu + (1 - b1) * grad
        nu = b2 * nu + (1 - b2) * grad**2
        mu_hat = mu / (1 - b1**t)
        nu_hat = nu / (1 - b2**t)
        update = config.learning_rate * mu_hat / (np.sqrt(nu_hat) + config.eps_div)
        phi = phi - update
        value, grad = infidelity_value_and_gradient(problem, phi)
        done = record(t, value, "adam", np.linalg.norm(update))
    record.trace.finish()
    return PulseSequence(phi), record.trace


def shift_spectrum(hess: np.ndarray, delta: float) -> tuple[np.ndarray, float]:
    """Add ``sigma = max(eps, delta - min eig)`` to every eigenvalue."""
    hess = 0.5 * (hess + hess.T)
    sigma = max(EPS, delta - float(np.linalg.eigvalsh(hess)[0]))
    return hess + sigma * np.eye(hess.shape[0]), sigma


def augmented_min_eigenvalue(evals: np.ndarray, coupling: np.ndarray, alpha: float) -> float:
    """Smallest eigenvalue of ``[[a^2 H, a g], [a g^T, 0]]``.

    ``evals`` are the eigenvalues of ``H`` and ``coupling = Q^T g`` in its
    eigenbasis.  Off the deflated directions the eigenvalue ``a^2 mu`` solves
    ``mu + sum c_i^2 / (a^2 (lam_i - mu)) = 0`` below the smallest coupled
    ``lam_i``; that scalar root replaces a dense eigensolve per damping round.
    """
    c2 = coupling**2
    scale = max(float(np.abs(evals).max(initial=0.0)), float(np.sqrt(c2.sum())), 1.0)
    coupled = c2 > (1e-15 * scale) ** 2
    candidates = [float(evals[~coupled].min())] if np.any(~coupled) else []
    if not np.any(coupled):
        return alpha**2 * min(candidates + [0.0])
    lam_c, c2_c = evals[coupled], c2[coupled]
    top = float(lam_c.min())

    def f(mu):
        return mu + np.sum(c2_c / (lam_c - mu)) / alpha**2

    lo = min(top, 0.0) - np.sqrt(c2_c.sum()) / alpha - 1.0
    hi = top - 1e-15 * scale
    if f(hi) <= 0.0:
        root = top
    else:
        root = scipy.optimize.brentq(f, lo, hi, xtol=1e-15 * scale, rtol=4 * EPS)
    return alpha**2 * min(candidates + [root])


def rfo_regularise(
    hess: np.ndarray,
    grad: np.ndarray,
    kappa: float,
    alpha0: float = 1.0,
    phi: float = 0.9,
    inner_max: int = 300,
) -> tuple[np.ndarray, list[float]]:
    """Damped augmented-Hessian regularisation.

    Builds ``[[a^2 H, a g], [a g^T, 0]]``, lifts its spectrum by
    ``sigma = max(eps, -min eig)`` and keeps the top-left block over ``a^2``.
    ``a`` shrinks by ``phi`` until the block's condition number drops below
    ``kappa`` or ``inner_max`` rounds pass.  Returns the block and the
    condition number after every round.
    """
    p = hess.shape[0]
    hess = 0.5 * (hess + hess.T)
    evals, q = np.linalg.eigh(hess)
    coupling = q.T @ np.ravel(grad)
    alpha = alpha0
    conds = []
    shift = 0.0
    for _ in range(inner_max):
        sigma = max(EPS, -augmented_min_eigenvalue(evals, coupling, alpha))
        # top-left block of (aug + sigma I), divided by a^2
        shift = sigma / alpha**2
        alpha *= phi
        lo, hi = evals[0] + shift, evals[-1] + shift
        cond = float(hi / lo) if lo > 0 else np.inf
        conds.append(cond)
        if cond < kappa:
            break
    return hess + shift * np.eye(p), conds


def armijo_backtrack(
    f: Callable[[np.ndarray], float],
    phi: np.ndarray,
    f0: float,
    grad: np.ndarray,
    u: np.ndarray,
    params: Backtracking,
) -> tuple[float, float] | None:
    """First ``lam`` in ``initial * shrink**j`` with
    ``f(phi - lam u) <= f0 - c lam g.u``; ``None`` if none qualifies."""
    slope = float(np.vdot(grad, u))
    lam = params.initial
    for _ in range(params.max_halvings + 1):
        trial = f(phi - lam * u)
        if trial <= f0 - params.armijo_c * lam * slope:
            return lam, trial
        lam *= params.shrink
    return None


def _second_order_run(problem, config, n_layers, initial, callback, kind, regularise):
    phi = _start(problem, n_layers, config, initial)
    record = _Recorder(config.epsilon, callback)
    value = infidelity(problem, phi)
    done = record(0, value, "init", 0.0)

    def f(x):
        return infidelity(problem, x)

    for t in range(1, config.max_iters + 1):
        if done:
            break
        value, grad, hess = infidelity_derivatives(problem, phi)
        g = grad.ravel()
        reg = regularise(hess, g)
        step = 0.0
        u = None
        if np.any(g):
            try:
                u = cholesky_solve(reg, g).reshape(phi.shape)
            except CholeskyError as exc:
                warnings.warn(f"iteration {t}: {exc}", RuntimeWarning, stacklevel=3)
        if u is not None and np.any(u):
            found = armijo_backtrack(f, phi, value, grad, u, config.backtracking)
            if found is not None:
                lam, value = found
                phi = phi - lam * u
                step = lam * float(np.linalg.norm(u))
        done = record(t, value, kind, step)
    record.trace.finish()
    return PulseSequence(phi), record.trace


def newton_raphson_run(
    problem: ControlProblem,
    config: NewtonConfig,
    n_layers: int,
    initial: np.ndarray | None = None,
    callback: Callable[[TraceRecord], None] | None = None,
) -> tuple[PulseSequence, OptRunTrace]:
    return _second_order_run(
        problem, config, n_layers, initial, callback, "newton",
        lambda h, g: shift_spectrum(h, config.delta)[0],
    )


def rfo_run(
    problem: ControlProblem,
    config: RfoConfig,
    n_layers: int,
    initial: np.ndarray | None = None,
    callback: Callable[[TraceRecord], None] | None = None,
) -> tuple[PulseSequence, OptRunTrace]:
    return _second_order_run(
        problem, config, n_layers, initial, callback, "rfo",
        lambda h, g: rfo_regularise(h, g, config.kappa, config.alpha0, config.phi, config.inner_max)[0],
    )
