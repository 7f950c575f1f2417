import numpy as np
import pytest

from obsgram.systems import LinearAdditiveSpec, LinearMultiplicativeSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def ou_spec():
    return LinearAdditiveSpec(
        A=np.array([[0.0, 1.0], [-1.0, -0.5]]),
        C=np.array([[1.0, 0.0]]),
        Omega=0.3 * np.eye(2),
        mean0=np.zeros(2),
        cov0=np.zeros((2, 2)),
    )


@pytest.fixture
def bs_spec():
    return LinearMultiplicativeSpec(
        A=-np.eye(2),
        C=np.array([[1.0, 0.0]]),
        Omega_list=[np.array([[0.0, 0.5], [0.5, 0.0]])],
        mean0=np.zeros(2),
        second_moment0=np.zeros((2, 2)),
    )


def random_stable(rng, n):
    """Random Hurwitz matrix with spectral abscissa <= -0.1."""
    M = rng.normal(size=(n, n))
    shift = np.max(np.linalg.eigvals(M).real) + 0.1 + rng.uniform(0, 1)
    return M - shift * np.eye(n)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
