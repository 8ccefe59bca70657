import numpy as np
import pytest

from vn1 import make_spin1_axis


def random_density(rng, n, rank=None):
    rank = n if rank is None else rank
    a = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_effect(rng, n):
    """Random positive operator with largest eigenvalue below one."""
    e = random_density(rng, n)
    return e / (np.linalg.eigvalsh(e)[-1] * rng.uniform(1.0, 2.0))


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def random_state_vector(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_axis(rng):
    n = rng.normal(size=3)
    return n / np.linalg.norm(n)


def random_spin(rng):
    return make_spin1_axis(random_axis(rng))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance summary -------------------------------------------------------

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Print and remember one PASS/FAIL line per acceptance criterion."""

    def record(number, title, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
