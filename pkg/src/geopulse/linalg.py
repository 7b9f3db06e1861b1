"""Dense complex linear-algebra kernels.

Exponentials of Hermitian generators go through ``eigh`` so layer unitaries
stay unitary to rounding; general (non-normal) exponentials use Pade
scaling-and-squaring with backward-error order selection (Higham 2005).
All matrix routines accept stacks ``(..., N, N)`` unless noted.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-8
LSTSQ_RCOND = 1e-12
BRANCH_TOL = 1e-10

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class CholeskyError(np.linalg.LinAlgError):
    """Raised when a matrix handed to :func:`cholesky_solve` is not positive-definite."""


def dagger(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2).conj()


def _hermitian_defect(h: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    return float(np.max(np.abs(h - dagger(h)), initial=0.0)) / scale


def expm_hermitian_generator(h: np.ndarray) -> np.ndarray:
    """Return ``exp(iH)`` for Hermitian ``H`` (or a stack of them)."""
    h = np.asarray(h, dtype=np.complex128)
    if _hermitian_defect(h) > HERMITIAN_TOL:
        raise ValueError("generator is not Hermitian")
    h = 0.5 * (h + dagger(h))
    w, q = np.linalg.eigh(h)
    return (q * np.exp(1j * w)[..., None, :]) @ dagger(q)


# Higham (2005), Table 2.3: largest 1-norm for which Pade order m is
# accurate to unit roundoff in double precision.
_PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_coefficients(m: int) -> list[float]:
    f = math.factorial
    return [f(2 * m - j) * f(m) / (f(2 * m) * f(j) * f(m - j)) for j in range(m + 1)]


_PADE_COEFFS = {m: _pade_coefficients(m) for m in _PADE_THETA}


def _pade(a: np.ndarray, m: int) -> np.ndarray:
    b = _PADE_COEFFS[m]
    eye = np.broadcast_to(np.eye(a.shape[-1], dtype=a.dtype), a.shape)
    a2 = a @ a
    if m == 13:
        a4 = a2 @ a2
        a6 = a2 @ a4
        u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
    else:
        powers = [eye, a2]
        for _ in range(2, (m + 1) // 2 + 1):
            powers.append(powers[-1] @ a2)
        u_inner = sum(b[j] * powers[(j - 1) // 2] for j in range(m, 0, -2))
        u = a @ u_inner
        v = sum(b[j] * powers[j // 2] for j in range(m - 1, -1, -2))
    return np.linalg.solve(v - u, v + u)


def _order_and_scaling(norm1: float) -> tuple[int, int]:
    for m in (3, 5, 7, 9):
        if norm1 <= _PADE_THETA[m]:
            return m, 0
    if norm1 <= _PADE_THETA[13]:
        return 13, 0
    s = max(0, int(math.ceil(math.log2(norm1 / _PADE_THETA[13]))))
    return 13, s


def expm_general(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of an arbitrary complex matrix or stack of matrices.

    Matrices in a stack are grouped by (Pade order, scaling power) so every
    group is evaluated with batched products.  Overflow raises
    ``FloatingPointError``.
    """
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError("expm_general needs square matrices")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries")
    a = a.astype(np.result_type(a.dtype, np.float64), copy=False)
    lead = a.shape[:-2]
    dim = a.shape[-1]
    flat = a.reshape(-1, dim, dim)
    norms = np.abs(flat).sum(axis=-2).max(axis=-1)
    plan = [_order_and_scaling(float(x)) for x in norms]
    out = np.empty_like(flat)
    for key in sorted(set(plan)):
        m, s = key
        sel = np.array([p == key for p in plan])
        block = flat[sel] / (2.0**s)
        with np.errstate(over="raise", invalid="raise"):
            try:
                r = _pade(block, m)
                for _ in range(s):
                    r = r @ r
            except FloatingPointError as exc:
                raise FloatingPointError("matrix exponential overflowed") from exc
        if not np.all(np.isfinite(r)):
            raise FloatingPointError("matrix exponential overflowed")
        out[sel] = r
    return out.reshape(lead + (dim, dim))


# Block upper-triangular matrices with one repeated diagonal block,
#   order 2: (a, b)       -> [[a, b], [0, a]]
#   order 3: (a, b, d, c) -> [[a, b, c], [0, a, d], [0, 0, a]]
# are closed under products, so Pade evaluation can stay in block form.

def _tri_mul(x, y):
    if len(x) == 2:
        a, b = x
        a2, b2 = y
        return (a @ a2, a @ b2 + b @ a2)
    a, b, d, c = x
    a2, b2, d2, c2 = y
    return (a @ a2, a @ b2 + b @ a2, a @ d2 + d @ a2, a @ c2 + b @ d2 + c @ a2)


def _tri_lin(terms):
    """Linear combination ``sum coef * X`` of block tuples."""
    out = None
    for coef, x in terms:
        scaled = tuple(coef * blk for blk in x)
        out = scaled if out is None else tuple(o + s for o, s in zip(out, scaled))
    return out


def _tri_solve(q, p):
    """``q^{-1} p`` for block tuples of equal order."""
    qi = np.linalg.inv(q[0])
    if len(q) == 2:
        inv = (qi, -qi @ q[1] @ qi)
    else:
        _, r, t, s = q
        qr = qi @ r @ qi
        inv = (qi, -qr, -qi @ t @ qi, qr @ t @ qi - qi @ s @ qi)
    return _tri_mul(inv, p)


def _tri_pade(x, m):
    b = _PADE_COEFFS[m]
    eye = np.eye(x[0].shape[-1], dtype=x[0].dtype)
    ident = (eye,) + tuple(np.zeros_like(blk) for blk in x[1:])
    x2 = _tri_mul(x, x)
    if m == 13:
        x4 = _tri_mul(x2, x2)
        x6 = _tri_mul(x2, x4)
        inner = _tri_mul(x6, _tri_lin([(b[13], x6), (b[11], x4), (b[9], x2)]))
        u = _tri_mul(x, _tri_lin([(1.0, inner), (b[7], x6), (b[5], x4), (b[3], x2), (b[1], ident)]))
        vin = _tri_mul(x6, _tri_lin([(b[12], x6), (b[10], x4), (b[8], x2)]))
        v = _tri_lin([(1.0, vin), (b[6], x6), (b[4], x4), (b[2], x2), (b[0], ident)])
    else:
        powers = [ident, x2]
        for _ in range(2, (m + 1) // 2 + 1):
            powers.append(_tri_mul(powers[-1], x2))
        u = _tri_mul(x, _tri_lin([(b[j], powers[(j - 1) // 2]) for j in range(m, 0, -2)]))
        v = _tri_lin([(b[j], powers[j // 2]) for j in range(m - 1, -1, -2)])
    return _tri_solve(_tri_lin([(1.0, v), (-1.0, u)]), _tri_lin([(1.0, v), (1.0, u)]))


def expm_block_triangular(diag: np.ndarray, *uppers: np.ndarray) -> tuple[np.ndarray, ...]:
    """Exponential of ``[[A, E1], [0, A]]`` or ``[[A, E1, 0], [0, A, E2], [0, 0, A]]``.

    Same Pade scaling-and-squaring as :func:`expm_general` evaluated in
    block form.  ``diag`` has shape ``(G, N, N)``; every upper block must
    broadcast against ``(G, ..., N, N)`` where the extra axes are shared by
    all blocks of one group.  Returns ``(exp(A), F1)`` or
    ``(exp(A), F1, F2, F13)``, the blocks of the exponential in the same
    layout as the input (``F13`` is the top-right corner).
    """
    if len(uppers) not in (1, 2):
        raise ValueError("need one or two off-diagonal blocks")
    diag = np.asarray(diag, dtype=np.complex128)
    uppers = tuple(np.asarray(e, dtype=np.complex128) for e in uppers)
    n_group = diag.shape[0]
    extra = max(e.ndim for e in uppers) - 3
    d_norm = np.abs(diag).sum(axis=-2).max(axis=-1)
    e_norm = np.zeros(n_group)
    for e in uppers:
        en = np.abs(e).sum(axis=-2).max(axis=-1)
        e_norm = np.maximum(e_norm, en.reshape(en.shape[0], -1).max(axis=1) if en.ndim > 1 else en)
    # column sums of the full block matrix are bounded by these sums
    plan = [_order_and_scaling(float(x)) for x in d_norm + e_norm]
    shape_a = (n_group,) + (1,) * extra + diag.shape[1:]
    a_all = diag.reshape(shape_a)
    results = None
    for key in sorted(set(plan)):
        m, s = key
        sel = np.array([p == key for p in plan])
        scale = 2.0**-s
        x = (a_all[sel] * scale,) + tuple(np.broadcast_to(e, np.broadcast_shapes(e.shape, (n_group,) + e.shape[1:]))[sel] * scale for e in uppers)
        if len(uppers) == 2:
            a, e1, e2 = x
            x = (a, e1, e2, np.zeros(np.broadcast_shapes(e1.shape, e2.shape), dtype=np.complex128))
        r = _tri_pade(x, m)
        for _ in range(s):
            r = _tri_mul(r, r)
        if results is None:
            results = [None] * len(r)
        for i, blk in enumerate(r):
            if results[i] is None:
                results[i] = np.zeros((n_group,) + blk.shape[1:], dtype=np.complex128)
            results[i][sel] = blk
    for blk in results:
        if not np.all(np.isfinite(blk)):
            raise FloatingPointError("matrix exponential overflowed")
    return tuple(results)


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL, what: str = "matrix") -> None:
    u = np.asarray(u)
    eye = np.eye(u.shape[-1])
    if np.linalg.norm(dagger(u) @ u - eye, axis=(-2, -1)).max() > tol:
        raise ValueError(f"{what} is not unitary")


def logm_unitary_principal(w: np.ndarray) -> np.ndarray:
    """Hermitian ``G`` with ``exp(iG) = W`` and every eigenphase in (-pi, pi].

    Uses the complex Schur form, which is diagonal for unitary (normal)
    input and always has unitary Schur vectors, including for degenerate
    spectra.
    """
    w = np.asarray(w, dtype=np.complex128)
    check_unitary(w, what="logarithm argument")
    t, z = scipy.linalg.schur(w, output="complex")
    phases = np.angle(np.diag(t))
    phases = np.where(phases <= -np.pi + BRANCH_TOL, np.pi, phases)
    g = (z * phases) @ z.conj().T
    return 0.5 * (g + g.conj().T)


def lstsq_min_norm(a: np.ndarray, b: np.ndarray, rcond: float = LSTSQ_RCOND) -> np.ndarray:
    """Minimum-norm least-squares solution via SVD with a relative cutoff."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(a.shape[1])
    keep = s > rcond * s[0]
    coeffs = (u[:, keep].T @ b) / s[keep]
    return vt[keep].T @ coeffs


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float,
    max_shrinks: int = 100,
) -> tuple[float, float]:
    """Golden-section maximisation of ``f`` on ``[lo, hi]``.

    Stops once the bracket is narrower than ``tol`` or after ``max_shrinks``
    contractions; returns the best probed ``(x, f(x))``.  The upper end is
    probed as well, so a monotone ``f`` yields exactly ``hi``.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if tol <= 0:
        raise ValueError("tol must be positive")
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    best_x, best_f = (x1, f1) if f1 >= f2 else (x2, f2)
    for _ in range(max_shrinks):
        if b - a < tol:
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
            if f1 > best_f:
                best_x, best_f = x1, f1
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
            if f2 > best_f:
                best_x, best_f = x2, f2
    if b >= hi:
        f_hi = f(hi)
        if f_hi > best_f:
            best_x, best_f = hi, f_hi
    return best_x, best_f


def cholesky_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive-definite ``A``."""
    a = np.asarray(a, dtype=np.float64)
    a = 0.5 * (a + a.T)
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise CholeskyError("matrix is not positive-definite; regularise further") from exc
    y = scipy.linalg.solve_triangular(low, b, lower=True)
    return scipy.linalg.solve_triangular(low.T, y, lower=False)
