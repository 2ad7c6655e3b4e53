import numpy as np
import pytest

from csiga.model import (DetectionProblem, generate_channel, make_constellation,
                         snr_to_sigma2, transmit)


@pytest.fixture
def rng():
    return np.random.default_rng(20241018)


def random_problem(rng, M, N, order=16, sigma2=0.1):
    cons = make_constellation(order)
    H = generate_channel(M, N, rng)
    idx = rng.integers(0, cons.order, N)
    x, y = transmit(idx, H, sigma2, cons, rng)
    return DetectionProblem(H, y, sigma2, cons), idx, x


def random_hermitian_pd(rng, N, shift=1.0):
    A = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    K = A @ A.conj().T / N + shift * np.eye(N)
    return 0.5 * (K + K.conj().T)


@pytest.fixture
def make_problem(rng):
    def factory(M=32, N=8, order=16, sigma2=0.1, snr_db=None):
        s2 = snr_to_sigma2(snr_db) if snr_db is not None else sigma2
        return random_problem(rng, M, N, order, s2)
    return factory


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""
    def record(number, title, ok, detail):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
