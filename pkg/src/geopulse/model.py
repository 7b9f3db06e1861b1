"""Control problems, piecewise-constant evolution and the Rydberg gate library."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .linalg import expm_hermitian_generator
from .pauli import LieVector, PauliBasis, RestrictionSet, assemble_hamiltonian, word_matrix

PULSE_SCHEMA = "# schema=geopulse.pulses/1"
PULSE_HEADER = ["layer", "control_index", "pauli_word", "value"]

GATES = ("toffoli", "ccz", "qft")


@dataclass(frozen=True)
class ControlProblem:
    """Drift + restricted controls + target unitary on ``n`` qubits.

    Layer ``l`` evolves as ``exp(i H(drift + embed(phi_l)))``; the layer
    duration is absorbed into the coefficients.
    """

    n: int
    restriction: RestrictionSet
    drift: LieVector
    target: np.ndarray
    epsilon: float = 1e-9
    name: str = ""
    basis: PauliBasis = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        basis = PauliBasis(self.n)
        object.__setattr__(self, "basis", basis)
        self.restriction.validate(basis)
        if self.drift.size != basis.size:
            raise ValueError("drift vector does not match basis size")
        overlap = set(self.drift.support.tolist()) & set(self.restriction.indices)
        if overlap:
            raise ValueError(f"drift and restriction share basis terms {sorted(overlap)}")
        target = np.array(self.target, dtype=np.complex128)
        if target.shape != (basis.dim, basis.dim):
            raise ValueError("target has wrong dimensions")
        if np.linalg.norm(target.conj().T @ target - np.eye(basis.dim)) > 1e-10:
            raise ValueError("target is not unitary")
        target.setflags(write=False)
        object.__setattr__(self, "target", target)
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def control_count(self) -> int:
        return len(self.restriction)

    @property
    def control_words(self) -> list[str]:
        return self.restriction.words(self.basis)

    @cached_property
    def drift_matrix(self) -> np.ndarray:
        return assemble_hamiltonian(self.drift, self.basis)

    @cached_property
    def control_matrices(self) -> np.ndarray:
        """``(K, N, N)`` stack of the controllable Pauli words."""
        return np.stack([word_matrix(w) for w in self.control_words])

    def with_target(self, target: np.ndarray) -> "ControlProblem":
        return ControlProblem(self.n, self.restriction, self.drift, target, self.epsilon, self.name)

    def layer_hamiltonians(self, phi: np.ndarray) -> np.ndarray:
        """Generators for each layer; ``phi`` is ``(K,)`` or ``(L, K)``."""
        phi = np.asarray(phi, dtype=np.float64)
        if phi.shape[-1] != self.control_count:
            raise ValueError(f"expected {self.control_count} controls per layer, got {phi.shape[-1]}")
        return self.drift_matrix + np.tensordot(phi, self.control_matrices, axes=([-1], [0]))


@dataclass(frozen=True)
class PulseSequence:
    """Piecewise-constant controls, ``controls[l, k]`` for layer ``l`` and control ``k``."""

    controls: np.ndarray

    def __post_init__(self):
        c = np.array(self.controls, dtype=np.float64)
        if c.ndim != 2:
            raise ValueError("controls must be a 2-D (L, K) array")
        if not np.all(np.isfinite(c)):
            raise ValueError("controls must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "controls", c)

    @property
    def layer_count(self) -> int:
        return self.controls.shape[0]

    @property
    def control_count(self) -> int:
        return self.controls.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.controls if dtype is None else self.controls.astype(dtype)

    def to_csv(self, problem: ControlProblem) -> str:
        if self.control_count != problem.control_count:
            raise ValueError("pulse sequence does not match the problem's controls")
        buf = io.StringIO()
        buf.write(PULSE_SCHEMA + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(PULSE_HEADER)
        words = problem.control_words
        for l in range(self.layer_count):
            for k in range(self.control_count):
                writer.writerow([l + 1, k, words[k], repr(float(self.controls[l, k]))])
        return buf.getvalue()

    def write_csv(self, path, problem: ControlProblem) -> None:
        Path(path).write_text(self.to_csv(problem))

    @classmethod
    def read_csv(cls, path, problem: ControlProblem | None = None) -> "PulseSequence":
        rows = [r for r in Path(path).read_text().splitlines() if r and not r.startswith("#")]
        reader = csv.DictReader(rows)
        if reader.fieldnames != PULSE_HEADER:
            raise ValueError(f"unexpected pulse CSV header {reader.fieldnames}")
        entries = [(int(r["layer"]), int(r["control_index"]), r["pauli_word"], float(r["value"])) for r in reader]
        if not entries:
            raise ValueError("pulse CSV has no rows")
        n_layers = max(e[0] for e in entries)
        n_controls = max(e[1] for e in entries) + 1
        controls = np.full((n_layers, n_controls), np.nan)
        for layer, k, word, value in entries:
            if problem is not None and problem.control_words[k] != word:
                raise ValueError(f"control {k} is {word!r} in file but {problem.control_words[k]!r} in problem")
            controls[layer - 1, k] = value
        if np.isnan(controls).any():
            raise ValueError("pulse CSV is missing entries")
        return cls(controls)


def _phi(phi) -> np.ndarray:
    return np.asarray(phi, dtype=np.float64)


def layer_unitary(problem: ControlProblem, phi_l) -> np.ndarray:
    """Unitary of one layer with control vector ``phi_l``."""
    phi_l = _phi(phi_l)
    if phi_l.ndim != 1:
        raise ValueError("phi_l must be a 1-D control vector")
    return expm_hermitian_generator(problem.layer_hamiltonians(phi_l))


def layer_unitaries(problem: ControlProblem, phi) -> np.ndarray:
    return expm_hermitian_generator(problem.layer_hamiltonians(_phi(phi)))


def ordered_product(unitaries: np.ndarray) -> np.ndarray:
    """``U_L ... U_2 U_1`` for a stack ordered first-applied first."""
    out = unitaries[0]
    for u in unitaries[1:]:
        out = u @ out
    return out


def evolve(problem: ControlProblem, phi) -> np.ndarray:
    """Total unitary; layer 1 acts first (rightmost factor)."""
    phi = _phi(phi)
    if phi.ndim != 2:
        raise ValueError("pulse sequence must be (L, K)")
    return ordered_product(layer_unitaries(problem, phi))


def unitary_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Phase-insensitive overlap ``|Tr(U^dag V)| / N``."""
    return float(abs(np.vdot(u, v))) / u.shape[-1]


def fidelity(problem: ControlProblem, phi) -> float:
    return unitary_fidelity(evolve(problem, phi), problem.target)


def infidelity(problem: ControlProblem, phi) -> float:
    return 1.0 - fidelity(problem, phi)


# ---------------------------------------------------------------------------
# gates
# ---------------------------------------------------------------------------

def qft_matrix(n: int) -> np.ndarray:
    dim = 2**n
    j = np.arange(dim)
    return np.exp(2j * np.pi * np.outer(j, j) / dim) / np.sqrt(dim)


def gate_matrix(name: str, n: int = 3) -> np.ndarray:
    """Target unitaries: ``toffoli`` and ``ccz`` (n = 3) and ``qft`` / ``qft-n``."""
    key = name.strip().lower()
    if key.startswith("qft"):
        suffix = key[3:].lstrip("-_")
        if suffix:
            if not suffix.isdigit():
                raise ValueError(f"unknown gate {name!r}")
            if int(suffix) != n:
                raise ValueError(f"gate {name!r} needs {suffix} qubits, got n={n}")
        return qft_matrix(n)
    if key in ("toffoli", "ccx", "ccnot"):
        if n != 3:
            raise ValueError("toffoli is a 3-qubit gate")
        u = np.eye(8, dtype=np.complex128)
        u[[6, 7]] = u[[7, 6]]
        return u
    if key == "ccz":
        if n != 3:
            raise ValueError("ccz is a 3-qubit gate")
        return np.diag([1.0] * 7 + [-1.0]).astype(np.complex128)
    raise ValueError(f"unknown gate {name!r}")


# ---------------------------------------------------------------------------
# Rydberg arrays
# ---------------------------------------------------------------------------

# Interaction graphs with relative r^-6 strengths; qubits are 0-based.
RYDBERG_EDGES: dict[int, list[tuple[int, int, float]]] = {
    # triangle, all couplings equal
    3: [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)],
    # square 0-1-2-3, diagonals at sqrt(2) spacing
    4: [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0), (0, 2, 1 / 8), (1, 3, 1 / 8)],
    # qubit 0 at the centre of the square 1-2-3-4
    5: [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0),
        (1, 2, 1 / 8), (2, 3, 1 / 8), (3, 4, 1 / 8), (1, 4, 1 / 8)],
    # 2x3 rectangle: top row 0-1-2, bottom row 3-4-5
    6: [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (0, 3, 1.0), (1, 4, 1.0), (2, 5, 1.0),
        (0, 4, 1 / 8), (1, 3, 1 / 8), (1, 5, 1 / 8), (2, 4, 1 / 8),
        (0, 5, 1 / 125), (2, 3, 1 / 125)],
}


def _local_word(n: int, ops: dict[int, str]) -> str:
    return "".join(ops.get(q, "I") for q in range(n))


def rydberg_drift(n: int, coupling_scale: float = 1.0) -> LieVector:
    if n not in RYDBERG_EDGES:
        raise ValueError(f"no Rydberg lattice for n={n}; supported: {sorted(RYDBERG_EDGES)}")
    basis = PauliBasis(n)
    terms = {_local_word(n, {i: "Z", j: "Z"}): coupling_scale * w for i, j, w in RYDBERG_EDGES[n]}
    return LieVector.from_words(terms, basis)


def rydberg_restriction(n: int) -> RestrictionSet:
    basis = PauliBasis(n)
    words = [_local_word(n, {q: s}) for q in range(n) for s in "XZ"]
    return RestrictionSet.from_words(words, basis)


def rydberg_problem(
    n: int,
    coupling_scale: float = 1.0,
    target: str | np.ndarray = "toffoli",
    epsilon: float = 1e-9,
) -> ControlProblem:
    """Rydberg-array problem: fixed ZZ couplings, per-atom X and Z controls (K = 2n)."""
    if n not in RYDBERG_EDGES:
        raise ValueError(f"no Rydberg lattice for n={n}; supported: {sorted(RYDBERG_EDGES)}")
    if isinstance(target, str):
        name = target
        target = gate_matrix(target, n)
    else:
        name = "custom"
    return ControlProblem(
        n=n,
        restriction=rydberg_restriction(n),
        drift=rydberg_drift(n, coupling_scale),
        target=target,
        epsilon=epsilon,
        name=name,
    )
