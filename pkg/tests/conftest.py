import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from voterlab import netgen

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def k2():
    return netgen.complete_graph(2)


@pytest.fixture
def p3():
    return netgen.path_graph(3)


@pytest.fixture
def c4():
    return netgen.cycle_graph(4)


@pytest.fixture
def star3():
    return netgen.star_graph(3)


def small_connected_graphs(max_n=4):
    """One representative per isomorphism class, 2 <= n <= max_n."""
    return [g for n in range(2, max_n + 1) for g in netgen.nonisomorphic_connected_graphs(n)]


def random_connected(rng, n_max=8, n_min=2):
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        iu, ju = np.triu_indices(n, k=1)
        pick = rng.random(iu.size) < rng.uniform(0.25, 0.9)
        g = netgen.Graph.from_edges(n, iu[pick], ju[pick])
        if netgen.components(g).count == 1:
            return g
