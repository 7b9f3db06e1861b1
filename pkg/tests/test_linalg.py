import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_hermitian, random_problem, random_unitary
from geopulse.geope import geodesic_generator, solve_update_direction
from geopulse.derivatives import full_jacobian
from geopulse.linalg import (
    CholeskyError,
    check_unitary,
    cholesky_solve,
    expm_block_triangular,
    expm_general,
    expm_hermitian_generator,
    golden_section_max,
    logm_unitary_principal,
    lstsq_min_norm,
)
from geopulse.model import evolve, fidelity


def taylor_expm(a, terms=50):
    """Scaled and squared Taylor series, an oracle independent of Pade."""
    a = np.asarray(a, dtype=np.complex128)
    s = max(0, int(np.ceil(np.log2(max(np.linalg.norm(a, 1), 1e-300)))) + 1)
    x = a / 2.0**s
    out = np.eye(a.shape[0], dtype=np.complex128)
    term = out.copy()
    for k in range(1, terms):
        term = term @ x / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


Z = np.diag([1.0, -1.0])


def test_hermitian_exp_trivial_cases():
    assert np.allclose(expm_hermitian_generator(np.zeros((4, 4))), np.eye(4))
    assert np.allclose(expm_hermitian_generator(np.pi / 2 * Z), np.diag([1j, -1j]), atol=1e-15)


def test_hermitian_exp_matches_taylor(rng):
    h = random_hermitian(rng, 8)
    assert np.abs(expm_hermitian_generator(h) - taylor_expm(1j * h)).max() < 1e-10


def test_hermitian_exp_rejects_non_hermitian():
    with pytest.raises(ValueError):
        expm_hermitian_generator(np.array([[0, 1], [0, 0]], dtype=complex))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 10.0))
def test_hermitian_exp_is_unitary(seed, norm):
    h = random_hermitian(np.random.default_rng(seed), 8)
    h *= norm / max(np.linalg.norm(h, 2), 1e-300)
    u = expm_hermitian_generator(h)
    assert np.linalg.norm(u.conj().T @ u - np.eye(8)) <= 1e-10


def test_general_exp_trivial_cases():
    assert np.allclose(expm_general(np.zeros((3, 3))), np.eye(3))
    assert np.array_equal(expm_general(np.array([[0.0, 1.0], [0.0, 0.0]])), [[1, 1], [0, 1]])


@pytest.mark.parametrize("scale", [0.01, 1.0, 8.0])
def test_general_exp_matches_taylor(rng, scale):
    a = scale * (rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16)))
    ref = taylor_expm(a)
    assert np.linalg.norm(expm_general(a) - ref) <= 1e-9 * np.linalg.norm(ref)


def test_general_exp_batched_orders(rng):
    a = np.stack([s * rng.normal(size=(6, 6)) for s in (1e-4, 0.1, 1.0, 30.0)])
    out = expm_general(a)
    for x, y in zip(a, out):
        assert np.linalg.norm(y - scipy.linalg.expm(x)) <= 1e-10 * np.linalg.norm(y)


def test_general_exp_reports_overflow():
    with pytest.raises(FloatingPointError):
        expm_general(np.array([[1e4, 0.0], [0.0, 0.0]]))


def test_block_triangular_matches_dense(rng):
    n = 4
    a = 1j * np.stack([random_hermitian(rng, n) for _ in range(3)])
    e1 = 1j * np.stack([random_hermitian(rng, n) for _ in range(3)])
    e2 = 1j * np.stack([random_hermitian(rng, n) for _ in range(3)])
    ea, f1 = expm_block_triangular(a, e1)
    ea2, g1, g2, g13 = expm_block_triangular(a, e1, e2)
    for i in range(3):
        z = np.zeros((n, n))
        big = np.block([[a[i], e1[i]], [z, a[i]]])
        ref = scipy.linalg.expm(big)
        assert np.allclose(ea[i], ref[:n, :n], atol=1e-12)
        assert np.allclose(f1[i], ref[:n, n:], atol=1e-12)
        big3 = np.block([[a[i], e1[i], z], [z, a[i], e2[i]], [z, z, a[i]]])
        ref3 = scipy.linalg.expm(big3)
        assert np.allclose(g1[i], ref3[:n, n:2 * n], atol=1e-12)
        assert np.allclose(g2[i], ref3[n:2 * n, 2 * n:], atol=1e-12)
        assert np.allclose(g13[i], ref3[:n, 2 * n:], atol=1e-12)


def test_logm_trivial_cases():
    assert np.allclose(logm_unitary_principal(np.eye(4)), 0)
    assert np.allclose(logm_unitary_principal(np.diag([1j, -1j])), np.pi / 2 * Z, atol=1e-14)


def test_logm_branch_puts_minus_one_at_plus_pi():
    g = logm_unitary_principal(-np.eye(2))
    assert np.allclose(g, np.pi * np.eye(2))


def test_logm_round_trip_random(rng):
    h = random_hermitian(rng, 8)
    w, q = np.linalg.eigh(h)
    h = (q * np.linspace(-np.pi + 0.2, np.pi - 0.2, 8)) @ q.conj().T
    g = logm_unitary_principal(expm_hermitian_generator(h))
    assert np.abs(g - h).max() < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_logm_expm_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    q = random_unitary(rng, 4)
    phases = rng.uniform(-np.pi + 0.1, np.pi - 0.1, size=4)
    h = (q * phases) @ q.conj().T
    assert np.abs(logm_unitary_principal(expm_hermitian_generator(h)) - h).max() < 1e-9


def test_logm_degenerate_spectrum(rng):
    q = random_unitary(rng, 6)
    h = (q * np.array([0.5, 0.5, 0.5, -1.0, -1.0, 2.0])) @ q.conj().T
    g = logm_unitary_principal(expm_hermitian_generator(h))
    assert np.abs(g - h).max() < 1e-9


def test_logm_rejects_non_unitary():
    with pytest.raises(ValueError):
        logm_unitary_principal(np.diag([1.0, 2.0]))
    with pytest.raises(ValueError):
        check_unitary(np.ones((2, 2)))


def test_lstsq_trivial_cases(rng):
    b = rng.normal(size=5)
    assert np.allclose(lstsq_min_norm(np.eye(5), b), b)
    assert np.allclose(lstsq_min_norm(np.array([[1.0], [1.0]]), np.array([0.0, 2.0])), [1.0])


def test_lstsq_beats_random_probes(rng):
    a = rng.normal(size=(40, 12))
    b = rng.normal(size=40)
    x = lstsq_min_norm(a, b)
    best = np.linalg.norm(a @ x - b)
    probes = x + rng.normal(scale=0.5, size=(1000, 12))
    assert np.all(np.linalg.norm(probes @ a.T - b, axis=1) >= best)
    others = rng.normal(size=(1000, 12))
    assert np.all(np.linalg.norm(others @ a.T - b, axis=1) >= best)


def test_lstsq_minimum_norm_on_rank_deficient(rng):
    a = rng.normal(size=(10, 3)) @ rng.normal(size=(3, 6))
    b = rng.normal(size=10)
    x = lstsq_min_norm(a, b)
    assert np.allclose(x, np.linalg.pinv(a) @ b)
    assert not np.any(lstsq_min_norm(np.zeros((3, 2)), b[:3]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lstsq_residual_is_global_minimum(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(15, 6))
    b = rng.normal(size=15)
    x = lstsq_min_norm(a, b)
    r = np.linalg.norm(a @ x - b)
    for d in rng.normal(size=(20, 6)) * 10.0 ** rng.uniform(-6, 1, size=(20, 1)):
        assert np.linalg.norm(a @ (x + d) - b) >= r - 1e-12


def test_golden_section_quadratic():
    x, fx = golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0, 1e-6)
    assert abs(x - 0.3) < 1e-5
    assert fx <= 0


def test_golden_section_monotone_hits_upper_bound():
    eta_max, tol = 1.29, 1e-6
    x, _ = golden_section_max(lambda t: t, 0.0, eta_max, tol)
    assert abs(x - eta_max) <= tol


def test_golden_section_shrink_cap():
    calls = []

    def f(t):
        calls.append(t)
        return -abs(t)

    golden_section_max(f, -1.0, 1.0, 1e-300, max_shrinks=100)
    assert len(calls) == 102


def test_golden_section_validates():
    with pytest.raises(ValueError):
        golden_section_max(lambda t: t, 1.0, 0.0, 1e-6)
    with pytest.raises(ValueError):
        golden_section_max(lambda t: t, 0.0, 1.0, 0.0)


@pytest.mark.parametrize("seed", range(3))
def test_golden_section_along_geope_direction(seed):
    # fidelity on a line through a random 2-qubit problem, GEOPE step direction
    rng = np.random.default_rng(seed)
    problem = random_problem(rng, 2)
    phi = rng.uniform(-1, 1, size=(6, problem.control_count))
    _, gamma = geodesic_generator(evolve(problem, phi), problem.target)
    direction = solve_update_direction(full_jacobian(problem, phi), gamma)
    f = lambda eta: fidelity(problem, phi + eta * direction)
    eta_max = 0.5
    _, best = golden_section_max(f, 0.0, eta_max, 1e-6 * eta_max)
    grid = max(f(t) for t in np.linspace(0.0, eta_max, 10_001))
    assert best >= grid - 1e-8


def test_cholesky_trivial_cases(rng):
    b = rng.normal(size=4)
    assert np.allclose(cholesky_solve(np.eye(4), b), b)
    assert np.allclose(cholesky_solve(np.diag([4.0, 9.0]), np.array([8.0, 27.0])), [2.0, 3.0])


def test_cholesky_matches_svd_solve(rng):
    m = rng.normal(size=(20, 20))
    a = m @ m.T + 0.5 * np.eye(20)
    b = rng.normal(size=20)
    x = cholesky_solve(a, b)
    u, s, vt = np.linalg.svd(a)
    ref = vt.T @ ((u.T @ b) / s)
    assert np.abs(x - ref).max() < 1e-9
    assert np.linalg.norm(a @ x - b) <= 1e-9 * np.linalg.norm(b)


def test_cholesky_flags_indefinite():
    with pytest.raises(CholeskyError):
        cholesky_solve(np.diag([1.0, -1.0]), np.ones(2))
