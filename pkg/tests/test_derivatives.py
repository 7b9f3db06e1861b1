import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_problem
from geopulse.derivatives import (
    NonDifferentiableFidelity,
    full_jacobian,
    infidelity_derivatives,
    infidelity_gradient,
    infidelity_hessian,
    infidelity_value_and_gradient,
    layer_partial,
    layer_partials,
    layer_second_partials,
)
from geopulse.model import ControlProblem, evolve, infidelity, layer_unitary, rydberg_problem
from geopulse.pauli import LieVector, PauliBasis, RestrictionSet

Z = np.diag([1.0, -1.0]).astype(complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)


def one_qubit(word, target=np.eye(2)):
    b = PauliBasis(1)
    return ControlProblem(1, RestrictionSet.from_words([word], b), LieVector.zeros(3), target)


def fd_layer(problem, phi_l, k, h=1e-5):
    e = np.zeros_like(phi_l)
    e[k] = h
    return (layer_unitary(problem, phi_l + e) - layer_unitary(problem, phi_l - e)) / (2 * h)


def fd_gradient(problem, phi, h=1e-6):
    g = np.zeros_like(phi)
    for idx in np.ndindex(phi.shape):
        e = np.zeros_like(phi)
        e[idx] = h
        g[idx] = (infidelity(problem, phi + e) - infidelity(problem, phi - e)) / (2 * h)
    return g


def test_partial_at_identity_is_generator():
    p = random_problem(np.random.default_rng(3), 2, unrestricted=True)
    for k in (0, 5, 14):
        assert np.allclose(layer_partial(p, np.zeros(p.control_count), k), 1j * p.basis.matrix(k), atol=1e-14)


def test_partial_commuting_case():
    p = one_qubit("Z")
    expected = 1j * Z @ layer_unitary(p, [np.pi / 2])
    assert np.allclose(layer_partial(p, np.array([np.pi / 2]), 0), expected, atol=1e-14)


def test_partial_matches_finite_difference(rng):
    p = rydberg_problem(3)
    phi_l = rng.uniform(-1, 1, size=p.control_count)
    for k in range(p.control_count):
        d = layer_partial(p, phi_l, k)
        fd = fd_layer(p, phi_l, k)
        assert np.linalg.norm(d - fd) <= 1e-6 * np.linalg.norm(d)


def test_batched_partials_match_single(rng):
    p = rydberg_problem(3)
    phi = rng.uniform(-1, 1, size=(3, p.control_count))
    batch = layer_partials(p, phi)
    for l in range(3):
        for k in range(p.control_count):
            assert np.abs(batch[l, k] - layer_partial(p, phi[l], k)).max() < 1e-12


def test_second_partials_match_finite_difference(rng):
    p = random_problem(rng, 2)
    phi = rng.uniform(-1, 1, size=(1, p.control_count))
    second = layer_second_partials(p, phi)[0]
    h = 1e-5
    for k in range(p.control_count):
        e = np.zeros(p.control_count)
        e[k] = h
        up = layer_partials(p, (phi[0] + e)[None])[0]
        down = layer_partials(p, (phi[0] - e)[None])[0]
        fd = (up - down) / (2 * h)
        assert np.abs(second[:, k] - fd).max() < 1e-6


def test_jacobian_single_layer_reduces_to_partial(rng):
    p = rydberg_problem(3)
    phi = rng.normal(size=(1, p.control_count))
    jac = full_jacobian(p, phi)
    assert jac.shape == (1, p.control_count)
    for k in range(p.control_count):
        assert np.allclose(jac.entries[0, k], layer_partial(p, phi[0], k), atol=1e-13)


def test_jacobian_identity_layers():
    p = random_problem(np.random.default_rng(1), 2, unrestricted=True)
    jac = full_jacobian(p, np.zeros((3, p.control_count)))
    for l in range(3):
        for k in range(p.control_count):
            assert np.allclose(jac.entries[l, k], 1j * p.basis.matrix(k), atol=1e-14)


def test_jacobian_matches_finite_difference(rng):
    p = random_problem(rng, 2)
    phi = rng.uniform(-1, 1, size=(4, p.control_count))
    jac = full_jacobian(p, phi)
    assert np.allclose(jac.unitary, evolve(p, phi))
    h = 1e-6
    for l in range(4):
        for k in range(p.control_count):
            e = np.zeros_like(phi)
            e[l, k] = h
            fd = (evolve(p, phi + e) - evolve(p, phi - e)) / (2 * h)
            assert np.abs(jac.entries[l, k] - fd).max() < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_jacobian_is_tangent(seed):
    rng = np.random.default_rng(seed)
    p = rydberg_problem(3)
    phi = rng.uniform(-2, 2, size=(3, p.control_count))
    jac = full_jacobian(p, phi)
    m = 1j * jac.unitary.conj().T @ jac.entries
    assert np.abs(m - np.swapaxes(m.conj(), -1, -2)).max() < 1e-8


def test_gradient_vanishes_at_solution(rng):
    p = rydberg_problem(3)
    phi = rng.normal(size=(3, p.control_count))
    solved = p.with_target(evolve(p, phi))
    assert np.linalg.norm(infidelity_gradient(solved, phi)) <= 1e-8
    a = 0.7
    single = one_qubit("X", np.cos(a) * np.eye(2) + 1j * np.sin(a) * X)
    assert np.abs(infidelity_gradient(single, np.array([[a]]))).max() <= 1e-12


def test_gradient_matches_finite_difference_toffoli(rng):
    p = rydberg_problem(3)
    phi = rng.uniform(-1, 1, size=(4, p.control_count))
    g = infidelity_gradient(p, phi)
    fd = fd_gradient(p, phi)
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g)
    value, g2 = infidelity_value_and_gradient(p, phi)
    assert value == pytest.approx(infidelity(p, phi), abs=1e-14)
    assert np.allclose(g2, g)


@pytest.mark.parametrize("h", [1e-4, 1e-5, 1e-6])
def test_gradient_step_sweep(rng, h):
    p = random_problem(rng, 2)
    phi = rng.uniform(-1, 1, size=(2, p.control_count))
    g = infidelity_gradient(p, phi)
    assert np.linalg.norm(g - fd_gradient(p, phi, h)) <= 1e-6 * np.linalg.norm(g)


def test_gradient_errors_at_zero_overlap():
    p = one_qubit("Z", X)
    with pytest.raises(NonDifferentiableFidelity):
        infidelity_gradient(p, np.zeros((1, 1)))


def test_hessian_positive_at_one_parameter_optimum():
    a = 0.4
    p = one_qubit("X", np.cos(a) * np.eye(2) + 1j * np.sin(a) * X)
    hess = infidelity_hessian(p, np.array([[a]]))
    assert hess.shape == (1, 1)
    # I(phi) = 1 - |cos(phi - a)| has curvature 1 at the optimum
    assert hess[0, 0] == pytest.approx(1.0, abs=1e-10)


def test_hessian_symmetric(rng):
    p = rydberg_problem(3)
    phi = rng.uniform(-1, 1, size=(3, p.control_count))
    hess = infidelity_hessian(p, phi)
    assert hess.shape == (18, 18)
    assert np.abs(hess - hess.T).max() < 1e-8


def test_hessian_matches_finite_difference_of_gradient(rng):
    p = random_problem(rng, 2)
    phi = rng.uniform(-1, 1, size=(2, p.control_count))
    value, grad, hess = infidelity_derivatives(p, phi)
    assert value == pytest.approx(infidelity(p, phi), abs=1e-14)
    assert np.allclose(grad, infidelity_gradient(p, phi))
    h = 1e-4
    fd = np.zeros_like(hess)
    flat = phi.ravel()
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = h
        up = infidelity_gradient(p, (flat + e).reshape(phi.shape)).ravel()
        down = infidelity_gradient(p, (flat - e).reshape(phi.shape)).ravel()
        fd[:, i] = (up - down) / (2 * h)
    assert np.linalg.norm(hess - fd) <= 1e-4 * np.linalg.norm(hess)
