"""Geodesic and gradient-based pulse engineering for multi-qubit gates."""

from .geope import GeopeConfig, OptRunTrace, geodesic_generator
from .geope import run as geope_run
from .grape import AdamConfig, NewtonConfig, RfoConfig, adam_run, newton_raphson_run, rfo_run
from .model import ControlProblem, PulseSequence, evolve, fidelity, gate_matrix, infidelity, rydberg_problem
from .pauli import LieVector, PauliBasis, RestrictionSet

__all__ = [
    "AdamConfig",
    "ControlProblem",
    "GeopeConfig",
    "LieVector",
    "NewtonConfig",
    "OptRunTrace",
    "PauliBasis",
    "PulseSequence",
    "RestrictionSet",
    "RfoConfig",
    "adam_run",
    "evolve",
    "fidelity",
    "gate_matrix",
    "geodesic_generator",
    "geope_run",
    "infidelity",
    "newton_raphson_run",
    "rfo_run",
    "rydberg_problem",
]

__version__ = "0.1.0"
