import numpy as np
import pytest

from halfline_bvp.kernel import GreenKernel, kernel_constants, make_shift, rebuild_kernel
from halfline_bvp.model import BoundFamily, BracketPair, MultipointProblem

K, M = 0.86, 0.35
F_EXAMPLE = "(2 + sin(t))/1000 * exp(-abs(x)) * abs(1 - x)/(x^2 + 1) * (y - 1)"
PHI_EXAMPLE = "(2 + sin(t)) * (r + 1)^2 / 1000"
ALPHA_EXAMPLE = "3/400 * (-(t + 1)*exp(-t) + (t^2 - t)/(t^2 + 1))"


@pytest.fixture(scope="session")
def problem():
    return MultipointProblem([0.11, 0.89], [0.0, 0.11], F_EXAMPLE)


@pytest.fixture(scope="session")
def bounds():
    return BoundFamily("Linf", PHI_EXAMPLE)


@pytest.fixture(scope="session")
def bracket():
    return BracketPair(ALPHA_EXAMPLE, "1")


@pytest.fixture(scope="session")
def gk(problem):
    return GreenKernel(problem, make_shift(K, M, "as_printed"))


@pytest.fixture(scope="session")
def gk_derived(problem):
    return rebuild_kernel(problem, K, M)


@pytest.fixture(scope="session")
def constants(gk):
    return kernel_constants(gk)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
