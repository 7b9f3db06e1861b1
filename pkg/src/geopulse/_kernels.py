"""Hot inner loops over Pauli-word structure.

Every Pauli word ``G`` on ``n`` qubits is a signed permutation matrix: with
x-mask ``xm`` (qubits carrying X or Y) and z-mask ``zm`` (qubits carrying Y or
Z), ``G[r, r ^ xm] = i**popcount(xm & zm) * (-1)**popcount((r ^ xm) & zm)``.
The two kernels here exploit that:

* ``pauli_transform`` returns ``T[b, xm, zm] = sum_c (-1)**popcount(c & zm)
  * M[b, c, c ^ xm]`` for a stack of matrices, i.e. ``Tr(G M)`` up to the word
  phase.  This is the dominant cost when vectorising L*K Jacobians.
* ``pauli_assemble`` scatters real coefficients of a set of words into a dense
  matrix.

Both come in a numba flavour and a pure-numpy flavour.  The numba path is used
when numba imports and ``GEOPULSE_DISABLE_NUMBA`` is unset (or ``0``).
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba = None

_DISABLED = os.environ.get("GEOPULSE_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = numba is not None and not _DISABLED


def _popcount_parity_table(n_bits: int) -> np.ndarray:
    size = 1 << n_bits
    table = np.zeros(size, dtype=np.int8)
    for v in range(1, size):
        table[v] = table[v >> 1] ^ (v & 1)
    return table


def hadamard_matrix(dim: int) -> np.ndarray:
    """Sylvester Hadamard matrix ``H[a, b] = (-1)**popcount(a & b)``."""
    n_bits = dim.bit_length() - 1
    parity = _popcount_parity_table(n_bits)
    a = np.arange(dim)
    return 1.0 - 2.0 * parity[a[:, None] & a[None, :]]


# ---------------------------------------------------------------------------
# numpy reference paths
# ---------------------------------------------------------------------------

def pauli_transform_numpy(mats: np.ndarray) -> np.ndarray:
    mats = np.asarray(mats, dtype=np.complex128)
    dim = mats.shape[-1]
    c = np.arange(dim)
    rows = np.broadcast_to(c[None, :], (dim, dim))
    cols = c[None, :] ^ c[:, None]  # cols[xm, c] = c ^ xm
    gathered = mats[..., rows, cols]
    return gathered @ hadamard_matrix(dim)


def pauli_assemble_numpy(dim, xmask, zmask, phase_pow, coeffs):
    out = np.zeros((dim, dim), dtype=np.complex128)
    if len(coeffs) == 0:
        return out
    n_bits = dim.bit_length() - 1
    parity = _popcount_parity_table(n_bits)
    r = np.arange(dim)
    cols = r[None, :] ^ xmask[:, None]
    signs = 1.0 - 2.0 * parity[cols & zmask[:, None]]
    vals = (np.asarray(coeffs)[:, None] * (1j ** phase_pow)[:, None]) * signs
    flat = (r[None, :] * dim + cols).ravel()
    acc = np.zeros(dim * dim, dtype=np.complex128)
    np.add.at(acc, flat, vals.ravel())
    return acc.reshape(dim, dim)


# ---------------------------------------------------------------------------
# numba paths
# ---------------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def _parity(v):
        p = 0
        while v:
            p ^= v & 1
            v >>= 1
        return p

    @numba.njit(cache=True)
    def _pauli_transform_kernel(mats, out):
        n_mat, dim = mats.shape[0], mats.shape[1]
        buf = np.empty(dim, dtype=np.complex128)
        for b in range(n_mat):
            for xm in range(dim):
                for c in range(dim):
                    buf[c] = mats[b, c, c ^ xm]
                h = 1
                while h < dim:
                    for i in range(0, dim, 2 * h):
                        for j in range(i, i + h):
                            x = buf[j]
                            y = buf[j + h]
                            buf[j] = x + y
                            buf[j + h] = x - y
                    h *= 2
                for zm in range(dim):
                    out[b, xm, zm] = buf[zm]

    @numba.njit(cache=True)
    def _pauli_assemble_kernel(dim, xmask, zmask, phase_pow, coeffs, out):
        phases = np.array([1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j])
        for t in range(coeffs.shape[0]):
            xm = xmask[t]
            zm = zmask[t]
            base = coeffs[t] * phases[phase_pow[t] % 4]
            for r in range(dim):
                c = r ^ xm
                if _parity(c & zm):
                    out[r, c] -= base
                else:
                    out[r, c] += base


def pauli_transform_numba(mats: np.ndarray) -> np.ndarray:
    mats = np.asarray(mats, dtype=np.complex128)
    lead = mats.shape[:-2]
    dim = mats.shape[-1]
    flat = np.ascontiguousarray(mats.reshape(-1, dim, dim))
    out = np.empty_like(flat)
    _pauli_transform_kernel(flat, out)
    return out.reshape(lead + (dim, dim))


def pauli_assemble_numba(dim, xmask, zmask, phase_pow, coeffs):
    out = np.zeros((dim, dim), dtype=np.complex128)
    _pauli_assemble_kernel(
        dim,
        np.ascontiguousarray(xmask, dtype=np.int64),
        np.ascontiguousarray(zmask, dtype=np.int64),
        np.ascontiguousarray(phase_pow, dtype=np.int64),
        np.ascontiguousarray(coeffs, dtype=np.float64),
        out,
    )
    return out


if USE_NUMBA:
    pauli_transform = pauli_transform_numba
    pauli_assemble = pauli_assemble_numba
else:
    pauli_transform = pauli_transform_numpy
    pauli_assemble = pauli_assemble_numpy
