import numpy as np
import pytest

from farmakit import _accel

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    """Compile the numba kernels once so per-test timings exclude JIT start-up."""
    if not _accel.NUMBA_ENABLED:
        return
    from farmakit._kernels import KERNEL_PAIRS

    g = np.zeros((4, 2, 2))
    g[0] = np.eye(2)
    eps = np.zeros((1, 3, 2))
    one = np.zeros((1, 2, 2))
    KERNEL_PAIRS["arma_recursion"][0](one, one, eps)
    KERNEL_PAIRS["ma_filter"][0](one, eps)
    KERNEL_PAIRS["innovations"][0](g, 3)
    KERNEL_PAIRS["whittle"][0](g, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
