import numpy as np
import pytest

ACCEPTANCE_LINES = []


def random_psd(rng, n, rank=None, spread=1.0):
    """Random PSD matrix A A^T / p with optional rank deficiency."""
    p = rank if rank is not None else n + 5
    A = rng.standard_normal((n, p)) * spread
    return A @ A.T / p


def random_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def with_spectrum(rng, values):
    Q = random_orthogonal(rng, len(values))
    K = (Q * np.asarray(values)) @ Q.T
    return 0.5 * (K + K.T), Q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
