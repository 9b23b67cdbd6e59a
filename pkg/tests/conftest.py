import sys

import numpy as np
import pytest

from anisoadapt.tetmesh import uniform_cube_mesh


@pytest.fixture(scope="session")
def cube4():
    return uniform_cube_mesh(4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_spd(rng, max_ratio=1e3, size=None):
    """Random SPD matrices with eigenvalue ratio up to ``max_ratio``."""
    shape = () if size is None else (size,)
    Q, _ = np.linalg.qr(rng.normal(size=shape + (3, 3)))
    lam = np.exp(rng.uniform(0.0, np.log(max_ratio), size=shape + (3,)))
    return (Q * lam[..., None, :]) @ np.swapaxes(Q, -1, -2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])
