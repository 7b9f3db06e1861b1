import numpy as np
import pytest
import scipy.linalg

from geopulse.model import ControlProblem
from geopulse.pauli import LieVector, PauliBasis, RestrictionSet


def random_hermitian(rng, dim, scale=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (a + a.conj().T) / 2


def random_unitary(rng, dim, scale=1.0):
    return scipy.linalg.expm(1j * random_hermitian(rng, dim, scale))


def random_problem(rng, n, n_controls=None, drift_terms=3, unrestricted=False):
    """Random drift on a few words, random restriction, random target."""
    basis = PauliBasis(n)
    if unrestricted:
        restriction = RestrictionSet(tuple(range(basis.size)))
        drift = LieVector.zeros(basis.size)
    else:
        k = n_controls or 2 * n
        perm = rng.permutation(basis.size)
        restriction = RestrictionSet(tuple(perm[:k]))
        dense = np.zeros(basis.size)
        dense[perm[k:k + drift_terms]] = rng.normal(size=drift_terms)
        drift = LieVector.from_dense(dense)
    return ControlProblem(n, restriction, drift, random_unitary(rng, basis.dim))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report one line each at the end of the session
ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if name.startswith("test_criterion_"):
        ACCEPTANCE_RESULTS[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split("_")[2])):
        outcome = ACCEPTANCE_RESULTS[name]
        mark = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{mark}  {name}")
