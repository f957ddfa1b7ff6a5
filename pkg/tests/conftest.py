import os

import hypothesis
import numpy as np
import pytest

from mulog.channelizer import ChannelBasis

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


def pytest_addoption(parser):
    parser.addoption("--slow", action="store_true", default=False, help="also run tests marked slow")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte-Carlo, end-to-end and throughput checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow") or "slow" in (config.getoption("-m") or ""):
        return
    skip = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def random_hpd(rng, n, dim, ridge=0.05):
    """n random Hermitian positive definite (dim x dim) matrices."""
    k = dim + 2
    x = rng.standard_normal((n, dim, k)) + 1j * rng.standard_normal((n, dim, k))
    m = x @ np.conj(np.swapaxes(x, -1, -2)) / (2 * k)
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2))) + ridge * np.eye(dim)


def random_hermitian(rng, n, dim, scale=1.0):
    x = rng.standard_normal((n, dim, dim)) + 1j * rng.standard_normal((n, dim, dim))
    return scale * 0.5 * (x + np.conj(np.swapaxes(x, -1, -2)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def hpd():
    return random_hpd


@pytest.fixture
def herm():
    return random_hermitian


def random_basis(rng, dim, offset=1.0):
    """Orthogonal A, random b and phi in [0.2, 2)."""
    n = dim * dim
    a, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return ChannelBasis(dim, a, offset * rng.standard_normal(n), rng.uniform(0.2, 2.0, n))


@pytest.fixture
def basis():
    return random_basis
