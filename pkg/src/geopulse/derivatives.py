"""Derivatives of layer unitaries, the total evolution and the infidelity.

Layer derivatives come from exponentiating upper block-triangular auxiliary
matrices: the top-right block of ``exp([[iH, iG_k], [0, iH]])`` is
``dU/dphi_k``, and the top-right block of the 3x3 analogue holds one
ordering of the second derivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import dagger, expm_block_triangular, expm_general, expm_hermitian_generator
from .model import ControlProblem
from .pauli import vectorize_tangent


class NonDifferentiableFidelity(ValueError):
    """The overlap ``Tr(U^dag V)`` vanishes, so ``|Tr|`` has no derivative."""


_OVERLAP_FLOOR = 1e-13


def layer_partials(problem: ControlProblem, phi: np.ndarray) -> np.ndarray:
    """``dU(phi_l)/dphi_{l,k}`` for all layers and controls, shape ``(L, K, N, N)``."""
    phi = np.atleast_2d(np.asarray(phi, dtype=np.float64))
    h = problem.layer_hamiltonians(phi)
    gens = problem.control_matrices
    return expm_block_triangular(1j * h, 1j * gens[None])[1]


def layer_partial(problem: ControlProblem, phi_l: np.ndarray, k: int) -> np.ndarray:
    """Derivative of one layer unitary with respect to control ``k``."""
    phi_l = np.asarray(phi_l, dtype=np.float64)
    if not 0 <= k < problem.control_count:
        raise IndexError(f"control index {k} out of range")
    h = problem.layer_hamiltonians(phi_l)
    dim = problem.dim
    block = np.zeros((2 * dim, 2 * dim), dtype=np.complex128)
    block[:dim, :dim] = block[dim:, dim:] = 1j * h
    block[:dim, dim:] = 1j * problem.control_matrices[k]
    return expm_general(block)[:dim, dim:]


def layer_second_partials(problem: ControlProblem, phi: np.ndarray) -> np.ndarray:
    """``d2U(phi_l)/dphi_{l,k} dphi_{l,k'}``, shape ``(L, K, K, N, N)``.

    The top-right block of ``exp([[A, E_k, 0], [0, A, E_k'], [0, 0, A]])``
    is one ordering of the mixed derivative; the two orderings are summed.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=np.float64))
    h = problem.layer_hamiltonians(phi)
    gens = problem.control_matrices
    corner = expm_block_triangular(1j * h, 1j * gens[None, :, None], 1j * gens[None, None, :])[3]
    return corner + np.swapaxes(corner, 1, 2)


def prefix_suffix(unitaries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Products of the layers before and after each layer.

    ``before[l] = U_{l-1} ... U_0`` and ``after[l] = U_{L-1} ... U_{l+1}``
    (0-based), each identity at the ends.
    """
    n_layers, dim = unitaries.shape[0], unitaries.shape[-1]
    before = np.empty_like(unitaries)
    after = np.empty_like(unitaries)
    acc = np.eye(dim, dtype=np.complex128)
    for l in range(n_layers):
        before[l] = acc
        acc = unitaries[l] @ acc
    acc = np.eye(dim, dtype=np.complex128)
    for l in range(n_layers - 1, -1, -1):
        after[l] = acc
        acc = acc @ unitaries[l]
    return before, after


@dataclass
class JacobianSet:
    """Jacobian of the total unitary at one control point.

    ``entries[l, k]`` is ``dU_G/dphi_{l,k}``; ``vectorised[l, k]`` holds the
    Pauli coefficients of ``-i * entries[l, k]``, the same frame in which the
    geodesic vector is expressed.
    """

    entries: np.ndarray
    vectorised: np.ndarray
    unitary: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape[:2]


@dataclass
class _Sweep:
    layers: np.ndarray
    partials: np.ndarray
    before: np.ndarray
    after: np.ndarray
    total: np.ndarray


def _sweep(problem: ControlProblem, phi: np.ndarray) -> _Sweep:
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 2:
        raise ValueError("pulse sequence must be (L, K)")
    layers = expm_hermitian_generator(problem.layer_hamiltonians(phi))
    partials = layer_partials(problem, phi)
    before, after = prefix_suffix(layers)
    total = after[0] @ layers[0]
    return _Sweep(layers, partials, before, after, total)


def full_jacobian(problem: ControlProblem, phi: np.ndarray) -> JacobianSet:
    s = _sweep(problem, phi)
    entries = s.after[:, None] @ s.partials @ s.before[:, None]
    vec = vectorize_tangent(-1j * entries, problem.basis)
    return JacobianSet(entries=entries, vectorised=vec, unitary=s.total)


def _overlap_derivatives(problem: ControlProblem, s: _Sweep) -> tuple[complex, np.ndarray, np.ndarray]:
    """``z = Tr(V^dag U_G)`` and its first derivatives ``dz[l, k]``."""
    v = problem.target
    z = complex(np.vdot(v, s.total))
    if abs(z) < _OVERLAP_FLOOR * problem.dim:
        raise NonDifferentiableFidelity("Tr(U_G^dag V) vanishes; fidelity is not differentiable here")
    # Tr(V^dag A_l D B_l) = Tr((B_l V^dag A_l) D)
    frame = s.before @ dagger(v)[None] @ s.after
    dz = np.einsum("lij,lkji->lk", frame, s.partials)
    return z, dz, frame


def _gradient_from(z: complex, dz: np.ndarray, dim: int) -> np.ndarray:
    return -np.real(np.conj(z) * dz) / (dim * abs(z))


def infidelity_gradient(problem: ControlProblem, phi: np.ndarray) -> np.ndarray:
    """Gradient of ``1 - |Tr(U_G^dag V)|/N`` with respect to every control, ``(L, K)``."""
    s = _sweep(problem, phi)
    z, dz, _ = _overlap_derivatives(problem, s)
    return _gradient_from(z, dz, problem.dim)


def infidelity_value_and_gradient(problem: ControlProblem, phi: np.ndarray) -> tuple[float, np.ndarray]:
    s = _sweep(problem, phi)
    z, dz, _ = _overlap_derivatives(problem, s)
    return 1.0 - abs(z) / problem.dim, _gradient_from(z, dz, problem.dim)


def infidelity_hessian(problem: ControlProblem, phi: np.ndarray) -> np.ndarray:
    """Hessian of the infidelity over layer-major flattened controls, ``(LK, LK)``."""
    return infidelity_derivatives(problem, phi)[2]


def infidelity_derivatives(problem: ControlProblem, phi: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Infidelity, gradient ``(L, K)`` and Hessian ``(LK, LK)`` in one sweep."""
    phi = np.asarray(phi, dtype=np.float64)
    s = _sweep(problem, phi)
    z, dz, frame = _overlap_derivatives(problem, s)
    n_layers, n_ctrl = phi.shape
    dim = problem.dim
    p = n_layers * n_ctrl

    # Cross-layer: with X_{l,k} = A_l D_{l,k} U_l^dag A_l^dag the mixed second
    # derivative for l > l' is X_{l,k} X_{l',k'} U_G.
    gens = s.after[:, None] @ s.partials @ dagger(s.layers)[:, None] @ dagger(s.after)[:, None]
    gens = gens.reshape(p, dim, dim)
    rotated = (s.total @ dagger(problem.target))[None] @ gens
    pair = np.einsum("aij,bji->ab", rotated, gens)  # Tr(R X_a X_b)
    layer_of = np.repeat(np.arange(n_layers), n_ctrl)
    later = layer_of[:, None] > layer_of[None, :]
    ddz = np.where(later, pair, pair.T)

    second = layer_second_partials(problem, phi)
    same = np.einsum("lij,lkmji->lkm", frame, second)
    for l in range(n_layers):
        sl = slice(l * n_ctrl, (l + 1) * n_ctrl)
        ddz[sl, sl] = same[l]

    dz_flat = dz.reshape(p)
    mod = abs(z)
    first = np.real(np.conj(z) * dz_flat)
    hess_mod = (np.real(np.conj(dz_flat)[:, None] * dz_flat[None, :] + np.conj(z) * ddz) / mod
                - np.outer(first, first) / mod**3)
    hess = -hess_mod / dim
    hess = 0.5 * (hess + hess.T)
    return 1.0 - mod / dim, -first.reshape(n_layers, n_ctrl) / (dim * mod), hess
