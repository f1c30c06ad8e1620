import numpy as np
import pytest

from mlsw import derive_params
from mlsw.core import layer_depths

ACCEPTANCE_LINES = {}  # criterion number -> result line


def random_params(rng, N, d, rho=None):
    r = rng.uniform(0.5, 1.5, N - 1)
    if N > 1:
        r = r / r.sum()
    if rho is None:
        rho = rng.uniform(0.05, 0.9)
    return derive_params(N, d, rng.uniform(0.5, 2.0, N), r, rho)


def random_point(rng, params, scale=0.1):
    """U-variables at one point: depths keep a margin and shear stays small."""
    N, d = params.N, params.d
    while True:
        U = np.concatenate([rng.normal(0, scale, N), rng.normal(0, scale, N * d)])
        if np.all(layer_depths(params, U) > 0.25 * params.delta):
            return U


def random_points(rng, params, count, scale=0.1):
    return np.stack([random_point(rng, params, scale) for _ in range(count)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
