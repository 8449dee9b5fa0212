import numpy as np
import pytest

from tokgt.graph import build_graph


@pytest.fixture
def path_graph():
    return build_graph([(0, 1), (1, 0), (1, 2)], 3)


def make_random_graph(rng, n, p=0.2):
    a = (rng.random((n, n)) < p).astype(float)
    a = np.triu(a, 1)
    a = a + a.T
    return build_graph(np.argwhere(a > 0), n), a
