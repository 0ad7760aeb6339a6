import numpy as np
import pytest

from cabinet60 import _backend

BACKENDS = [pytest.param(_backend.python_kernels, id="python")]
if _backend.compiled_kernels is not None:
    BACKENDS.append(pytest.param(_backend.compiled_kernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
