"""Shared test setup.

The worker-thread cap must be in the environment before numba is first
imported, so it happens here at conftest import time, ahead of any test
module import.
"""

import os

os.environ.setdefault("NUMBA_NUM_THREADS", "8")

import numpy as np
import pytest
from hypothesis import settings

from camscore import kernels

# jit warmup and compilation make per-example deadlines meaningless
settings.register_profile("pkg", deadline=None, max_examples=60)
settings.load_profile("pkg")


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jit kernels once up front so no test pays for it."""
    stack = np.random.default_rng(0).random((3, 8)).astype(np.float32)
    kernels.pair_overlap_sums(stack)
    kernels.bilinear_resize_raw(stack[:2], 5, 3)
    if kernels.active_backend() == "numba":
        kernels.set_workers(8)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)
