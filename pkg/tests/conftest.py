import numpy as np
import pytest

from starbattery.spin_core import DensityMatrix

ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str = "") -> bool:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_density(dim, rng, rank=None):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(dim, rng):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (g + g.conj().T) / 2


def haar_unitaries(dim, count, rng):
    z = (rng.normal(size=(count, dim, dim)) + 1j * rng.normal(size=(count, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def bell_state():
    psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    return DensityMatrix((2, 2), np.outer(psi, psi))
