import numpy as np
import pytest

from subspace_psld.linmodel import AnalyticVae, make_subspace_model


@pytest.fixture
def model():
    return make_subspace_model(64, 8, seed=7)


@pytest.fixture
def vae(model):
    return AnalyticVae.from_model(model)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def naive_matvec(M, v):
    """Matrix-vector product as explicit loops, independent of BLAS."""
    out = np.zeros(M.shape[0])
    for i in range(M.shape[0]):
        acc = 0.0
        for j in range(M.shape[1]):
            acc += M[i, j] * v[j]
        out[i] = acc
    return out


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
