import os

# per-op finiteness assertions on for the whole suite (cheap at test sizes)
os.environ.setdefault("ONLSTM_CHECK_FINITE", "1")

import numpy as np
import pytest

from onlstm import kernels


def pytest_configure(config):
    # pay the one-off JIT cost before any timed test runs
    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
