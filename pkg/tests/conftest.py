import numpy as np
import pytest

from tdrcap.linalg import GaussianMoments, unvech

FIG3_VECH = [0.0016, 0.0012, 0.0008, 0.0017, 0.0002, 0.0018]
FIG3_GAMMA = 0.6163


@pytest.fixture
def fig3_cov():
    return unvech(np.array(FIG3_VECH))


@pytest.fixture
def fig3_provider(fig3_cov):
    return GaussianMoments(fig3_cov)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, n, scale=1.0):
    B = rng.standard_normal((n, n))
    return scale * (B @ B.T / n + 0.1 * np.eye(n))


def random_stable(rng, n, rho=0.9):
    A = rng.standard_normal((n, n))
    return rho * A / np.max(np.abs(np.linalg.eigvals(A)))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
