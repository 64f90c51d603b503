import numpy as np
import pytest

from autoda import kernels
from autoda.oracles import HalfspaceOracle
from autoda.reference import boundary_reference


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    """Compile (or load from cache) every kernel once per session."""
    kernels.warmup()


@pytest.fixture
def boundary():
    return boundary_reference()


@pytest.fixture
def halfspace16():
    """Adversarial iff x[0] > 0, in 16 dimensions."""
    w = np.zeros(16)
    w[0] = 1.0
    return HalfspaceOracle(w, 0.0)


@pytest.fixture
def halfspace_setup(halfspace16):
    """(oracle, x0 at distance 1, adversarial start at distance 4)."""
    x0 = np.zeros(16)
    x0[0] = -1.0
    x1 = np.zeros(16)
    x1[0] = 3.0
    return halfspace16, x0, x1
