"""Geodesic diagnostics on the unitary group.

Lengths use the normalised metric ``<A, B> = Re Tr(A^dag B) / N``, under
which the length of the geodesic from ``U`` to ``V`` equals the Euclidean
norm of its Pauli coefficient vector.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .geope import geodesic_generator
from .linalg import check_unitary, dagger, expm_hermitian_generator
from .pauli import SYMBOLS, PauliBasis, vectorize_tangent

SINGULAR_TOL = 1e-8


@dataclass(frozen=True)
class PerturbationReport:
    base_length: float
    perturbed_length: float
    first_order_prediction: float
    direction_overlap: float

    def __post_init__(self):
        if self.base_length < 0 or self.perturbed_length < 0:
            raise ValueError("lengths must be non-negative")


def _length_of(gamma: np.ndarray) -> float:
    dim = gamma.shape[0]
    return float(np.sqrt(max(np.trace(gamma @ gamma).real, 0.0) / dim))


def geodesic_length(u_g: np.ndarray, v: np.ndarray) -> float:
    """Length of the principal geodesic from ``u_g`` to ``v`` (global phase removed)."""
    gamma, _ = geodesic_generator(u_g, v)
    return _length_of(gamma)


def path_length(u_g: np.ndarray, gamma: np.ndarray, nodes: int = 1001) -> float:
    """Quadrature of ``|dX/dt|`` along ``X(t) = U exp(i t Gamma)``, ``t`` in [0, 1]."""
    ts = np.linspace(0.0, 1.0, nodes)
    w, q = np.linalg.eigh(gamma)
    dim = gamma.shape[0]
    speeds = np.empty(nodes)
    for i, t in enumerate(ts):
        x = u_g @ (q * np.exp(1j * t * w)) @ dagger(q)
        dx = x @ (1j * gamma)
        speeds[i] = np.sqrt(np.vdot(dx, dx).real / dim)
    return float(scipy.integrate.simpson(speeds, x=ts))


def _simpson_weights(nodes: int) -> np.ndarray:
    if nodes < 3 or nodes % 2 == 0:
        raise ValueError("Simpson's rule needs an odd node count >= 3")
    w = np.ones(nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * (nodes - 1))


def log_frechet_integral(w: np.ndarray, k: np.ndarray, nodes: int = 201, rtol: float = 1e-10) -> np.ndarray:
    """``D = int_0^1 R(s) K W R(s) ds`` with ``R(s) = (s W + (1 - s) I)^-1``.

    Composite Simpson on ``nodes`` points, compared with the half-resolution
    rule; the pair is Richardson-extrapolated and the grid doubled until the
    two agree to ``rtol``.  ``W`` must not have an eigenvalue at -1.
    """
    w = np.asarray(w, dtype=np.complex128)
    k = np.asarray(k, dtype=np.complex128)
    check_unitary(w, what="W")
    # W is normal, so R(s) is diagonal in W's Schur basis.
    t, z = scipy.linalg.schur(w, output="complex")
    lam = np.diag(t)
    if np.min(np.abs(lam + 1.0)) < SINGULAR_TOL:
        raise ValueError("W has an eigenvalue at -1; the interpolant is singular")
    m = dagger(z) @ k @ w @ z

    def simpson(n):
        s = np.linspace(0.0, 1.0, n)
        r = 1.0 / (s[:, None] * lam[None, :] + (1.0 - s[:, None]))
        kern = np.einsum("s,si,sj->ij", _simpson_weights(n), r, r)
        return kern * m

    if nodes % 4 != 1:
        raise ValueError("node count must be 1 mod 4 so the half grid is a Simpson grid")
    coarse = simpson((nodes + 1) // 2)
    fine = simpson(nodes)
    for _ in range(8):
        scale = max(1.0, float(np.abs(fine).max()))
        if np.abs(fine - coarse).max() <= rtol * scale * 15.0:
            break
        nodes = 2 * nodes - 1
        coarse, fine = fine, simpson(nodes)
    else:
        warnings.warn("Frechet quadrature did not reach the requested tolerance", RuntimeWarning, stacklevel=2)
    d = z @ (fine + (fine - coarse) / 15.0) @ dagger(z)
    return 0.5 * (d + dagger(d))


def perturbation_report(u_g: np.ndarray, v: np.ndarray, k: np.ndarray, eps: float) -> PerturbationReport:
    """Compare the geodesic length after ``U_G -> U_G exp(i eps K)`` with its
    first-order prediction ``L - eps Tr(D Gamma) / (N L)``."""
    gamma, _ = geodesic_generator(u_g, v)
    dim = gamma.shape[0]
    base = _length_of(gamma)
    w = dagger(u_g) @ v
    d = log_frechet_integral(w, k)
    pred = base - eps * np.trace(d @ gamma).real / (dim * base)
    moved = geodesic_length(u_g @ expm_hermitian_generator(eps * np.asarray(k)), v)
    kk = np.sqrt(np.trace(k @ k).real)
    gg = np.sqrt(np.trace(gamma @ gamma).real)
    overlap = float(np.trace(k @ gamma).real / (kk * gg)) if kk > 0 and gg > 0 else 0.0
    return PerturbationReport(base, moved, float(pred), overlap)


def max_fidelity_direction(gamma: np.ndarray, basis: PauliBasis) -> tuple[np.ndarray, float]:
    """Unit coefficient vector of the perturbation that raises the fidelity
    fastest at first order, and its cosine with the geodesic direction.

    The fidelity of ``exp(i Gamma) exp(-i eps K)`` changes at first order by
    ``eps * sum_j a_j k_j`` with ``a_j = Im(conj(T) Tr(exp(iGamma) G_j)) / |T|``
    and ``T = Tr exp(i Gamma)``.
    """
    gamma = np.asarray(gamma, dtype=np.complex128)
    w = expm_hermitian_generator(gamma)
    tr = np.trace(w)
    if abs(tr) < 1e-12 * basis.dim:
        raise ValueError("Tr(exp(i Gamma)) vanishes; the first-order term is undefined")
    # vectorize_tangent divides by N
    coeffs = vectorize_tangent(w, basis) * basis.dim
    a = np.imag(np.conj(tr) * coeffs) / abs(tr)
    norm_a = np.linalg.norm(a)
    if norm_a == 0.0:
        raise ValueError("first-order fidelity change vanishes in every direction")
    k_hat = a / norm_a
    g = vectorize_tangent(gamma, basis).real
    overlap = float(k_hat @ g / np.linalg.norm(g)) if np.any(g) else 0.0
    return k_hat, overlap


def pair_word(alpha: int, beta: int) -> str:
    """Two-qubit word for index pair ``(alpha, beta)`` with 0..3 = I, X, Y, Z."""
    return SYMBOLS[alpha] + SYMBOLS[beta]


def two_qubit_example() -> np.ndarray:
    """``X X + Y Y + I Z`` on two qubits."""
    basis = PauliBasis(2)
    return sum(basis.matrix(basis.index(w)) for w in ("XX", "YY", "IZ"))
