"""Pauli-word basis of su(2**n), Lie-algebra vectors and restrictions.

Words are strings over ``IXYZ``; the basis lists every word except the
all-identity one in lexicographic order with ``I < X < Y < Z``.  The first
symbol acts on the most significant tensor factor, matching ``np.kron``
ordering.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Iterable, Mapping

import numpy as np

from . import _kernels

SYMBOLS = "IXYZ"

PAULI_MATRICES = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

# Below this support fraction a LieVector is stored sparsely.
SPARSE_FRACTION = 0.1


def _check_word(word: str) -> str:
    word = word.strip().upper()
    if not word or any(s not in SYMBOLS for s in word):
        raise ValueError(f"invalid Pauli word {word!r}")
    return word


def word_matrix(word: str) -> np.ndarray:
    """Dense matrix of a Pauli word, built as a Kronecker product."""
    word = _check_word(word)
    return reduce(np.kron, (PAULI_MATRICES[s] for s in word))


class PauliBasis:
    """Lexicographically ordered non-identity Pauli words on ``n`` qubits."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("qubit count must be >= 1")
        self.n = n
        self.dim = 2**n
        self.size = 4**n - 1
        digits = np.array(list(itertools.product(range(4), repeat=n))[1:], dtype=np.int64)
        weights = 1 << np.arange(n - 1, -1, -1)
        xbits = (digits == 1) | (digits == 2)
        zbits = (digits == 2) | (digits == 3)
        self.xmask = (xbits * weights).sum(axis=1)
        self.zmask = (zbits * weights).sum(axis=1)
        self.phase_pow = (digits == 2).sum(axis=1) % 4
        self._digits = digits

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        return isinstance(other, PauliBasis) and other.n == self.n

    def __hash__(self) -> int:
        return hash(("PauliBasis", self.n))

    def __repr__(self) -> str:
        return f"PauliBasis(n={self.n})"

    def __reduce__(self):
        return (PauliBasis, (self.n,))

    @cached_property
    def words(self) -> tuple[str, ...]:
        return tuple("".join(SYMBOLS[d] for d in row) for row in self._digits)

    @cached_property
    def _position(self) -> dict[str, int]:
        return {w: i for i, w in enumerate(self.words)}

    def index(self, word: str) -> int:
        word = _check_word(word)
        if len(word) != self.n:
            raise ValueError(f"word {word!r} has length {len(word)}, expected {self.n}")
        if word == "I" * self.n:
            raise ValueError("the all-identity word is not part of the basis")
        return self._position[word]

    def word(self, index: int) -> str:
        return self.words[index]

    def matrix(self, index: int) -> np.ndarray:
        return word_matrix(self.words[index])

    @cached_property
    def _transform_lookup(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.xmask, self.zmask, (1j ** self.phase_pow)


@dataclass(frozen=True)
class RestrictionSet:
    """Basis positions of the controllable words, kept sorted."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if not idx:
            raise ValueError("restriction set must be non-empty")
        if idx[0] < 0:
            raise ValueError("negative basis index in restriction")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_words(cls, words: Iterable[str], basis: PauliBasis) -> "RestrictionSet":
        return cls(tuple(basis.index(w) for w in words))

    def words(self, basis: PauliBasis) -> list[str]:
        return [basis.word(i) for i in self.indices]

    def validate(self, basis: PauliBasis) -> None:
        if self.indices[-1] >= basis.size:
            raise ValueError("restriction index out of range for basis")

    def mask(self, size: int) -> np.ndarray:
        m = np.zeros(size, dtype=bool)
        m[list(self.indices)] = True
        return m

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, index: int) -> bool:
        return index in set(self.indices)


class LieVector:
    """Real coefficient vector over a Pauli basis.

    Stored sparsely (sorted indices + values) when fewer than 10% of the
    entries are non-zero, densely otherwise.  Immutable.
    """

    __slots__ = ("size", "_indices", "_values", "_dense")

    def __init__(self, size: int, indices=None, values=None, dense=None):
        _set = object.__setattr__
        _set(self, "size", int(size))
        if dense is not None:
            dense = np.array(dense, dtype=np.float64)
            if dense.shape != (self.size,):
                raise ValueError("dense coefficient array has wrong length")
            if not np.all(np.isfinite(dense)):
                raise ValueError("LieVector coefficients must be finite")
            dense.setflags(write=False)
            _set(self, "_dense", dense)
            _set(self, "_indices", None)
            _set(self, "_values", None)
        else:
            idx = np.asarray(indices if indices is not None else [], dtype=np.int64)
            val = np.asarray(values if values is not None else [], dtype=np.float64)
            if idx.shape != val.shape:
                raise ValueError("indices and values must have equal length")
            if idx.size and (idx.min() < 0 or idx.max() >= self.size):
                raise ValueError("index out of range")
            if len(np.unique(idx)) != idx.size:
                raise ValueError("duplicate indices")
            if not np.all(np.isfinite(val)):
                raise ValueError("LieVector coefficients must be finite")
            order = np.argsort(idx)
            idx, val = idx[order], val[order]
            idx.setflags(write=False)
            val.setflags(write=False)
            _set(self, "_dense", None)
            _set(self, "_indices", idx)
            _set(self, "_values", val)

    def __setattr__(self, name, value):
        raise AttributeError("LieVector is immutable")

    def __reduce__(self):
        if self._dense is not None:
            return (LieVector, (self.size, None, None, self._dense))
        return (LieVector, (self.size, self._indices, self._values))

    @classmethod
    def from_dense(cls, coeffs) -> "LieVector":
        coeffs = np.asarray(coeffs, dtype=np.float64)
        support = np.flatnonzero(coeffs)
        if support.size < SPARSE_FRACTION * coeffs.size:
            return cls(coeffs.size, support, coeffs[support])
        return cls(coeffs.size, dense=coeffs)

    @classmethod
    def from_words(cls, terms: Mapping[str, float], basis: PauliBasis) -> "LieVector":
        dense = np.zeros(basis.size)
        for w, v in terms.items():
            dense[basis.index(w)] += v
        return cls.from_dense(dense)

    @classmethod
    def zeros(cls, size: int) -> "LieVector":
        return cls(size, [], [])

    @property
    def is_sparse(self) -> bool:
        return self._dense is None

    @property
    def support(self) -> np.ndarray:
        if self._dense is None:
            return self._indices[self._values != 0]
        return np.flatnonzero(self._dense)

    def items(self) -> tuple[np.ndarray, np.ndarray]:
        """Non-zero ``(indices, values)``."""
        if self._dense is None:
            keep = self._values != 0
            return self._indices[keep], self._values[keep]
        idx = np.flatnonzero(self._dense)
        return idx, self._dense[idx]

    def to_dense(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense.copy()
        out = np.zeros(self.size)
        out[self._indices] = self._values
        return out

    def __array__(self, dtype=None, copy=None):
        arr = self.to_dense()
        return arr if dtype is None else arr.astype(dtype)

    def __add__(self, other: "LieVector") -> "LieVector":
        if other.size != self.size:
            raise ValueError("size mismatch")
        return LieVector.from_dense(self.to_dense() + other.to_dense())

    def __mul__(self, scalar: float) -> "LieVector":
        return LieVector.from_dense(self.to_dense() * float(scalar))

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, LieVector) and other.size == self.size and np.array_equal(
            self.to_dense(), other.to_dense()
        )

    def __repr__(self) -> str:
        kind = "sparse" if self.is_sparse else "dense"
        return f"LieVector(size={self.size}, {kind}, nnz={self.support.size})"


def _as_dense(theta, basis: PauliBasis) -> np.ndarray:
    arr = theta.to_dense() if isinstance(theta, LieVector) else np.asarray(theta, dtype=np.float64)
    if arr.shape != (basis.size,):
        raise ValueError(f"coefficient vector has shape {arr.shape}, basis needs ({basis.size},)")
    return arr


def assemble_hamiltonian(theta, basis: PauliBasis) -> np.ndarray:
    """``sum_j theta_j G_j`` as a dense Hermitian matrix."""
    if isinstance(theta, LieVector):
        if theta.size != basis.size:
            raise ValueError("LieVector size does not match basis")
        idx, vals = theta.items()
    else:
        arr = _as_dense(theta, basis)
        idx = np.flatnonzero(arr)
        vals = arr[idx]
    return _kernels.pauli_assemble(basis.dim, basis.xmask[idx], basis.zmask[idx], basis.phase_pow[idx], vals)


def vectorize_tangent(mats: np.ndarray, basis: PauliBasis) -> np.ndarray:
    """Complex Pauli coefficients ``Tr(G_j M) / N`` of one matrix or a stack.

    The identity (trace) component is dropped.  Output shape is
    ``mats.shape[:-2] + (4**n - 1,)``.
    """
    mats = np.asarray(mats)
    if mats.shape[-2:] != (basis.dim, basis.dim):
        raise ValueError("matrix dimension does not match basis")
    t = _kernels.pauli_transform(mats)
    xm, zm, phase = basis._transform_lookup
    return t[..., xm, zm] * phase / basis.dim


def restrict(theta, restriction: RestrictionSet):
    """Zero every coefficient outside ``restriction``.

    Accepts a LieVector (returns a LieVector) or a plain array whose last
    axis runs over the basis (returns an array).
    """
    if isinstance(theta, LieVector):
        mask = restriction.mask(theta.size)
        return LieVector.from_dense(np.where(mask, theta.to_dense(), 0.0))
    arr = np.asarray(theta)
    mask = restriction.mask(arr.shape[-1])
    return np.where(mask, arr, 0)


def embed(values, restriction: RestrictionSet, size: int) -> np.ndarray:
    """Scatter per-control values onto their basis positions (last axis)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] != len(restriction):
        raise ValueError("control vector length does not match restriction size")
    out = np.zeros(values.shape[:-1] + (size,))
    out[..., list(restriction.indices)] = values
    return out
