import numpy as np
import pytest

from codedcomp import derive, PartitionedParams
from codedcomp.assignment import AssignmentMatrix


@pytest.fixture(scope="session")
def ex1():
    """Small worked system: K=6, q=4, m=20, N=4, eta=1/2 (T=5 storage)."""
    return derive(K=6, q=4, m=20, n=10, N=4, eta="1/2")


@pytest.fixture(scope="session")
def fig2():
    """Large sweep system: K=9, q=6, m=n=N=6000, eta=1/3."""
    return derive(K=9, q=6, m=6000, n=6000, N=6000, eta="1/3")


@pytest.fixture(scope="session")
def ex1_storage(ex1):
    """The worked 15x5 storage design: partition j fills batches 3j..3j+2
    with two rows each."""
    pp = PartitionedParams(ex1, 5)
    P = np.zeros((15, 5), dtype=np.int64)
    for i in range(15):
        P[i, i // 3] = 2
    return AssignmentMatrix(pp, P)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
