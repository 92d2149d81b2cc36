import numpy as np
import pytest

from subcluster.graph import GeneratorConfig, generate_clusterable
from subcluster.spectral import build_reference


@pytest.fixture(scope="session")
def expanders_400():
    """Four disjoint 100-vertex matching-union expanders, degree bound 8."""
    return generate_clusterable(GeneratorConfig(n=400, k=4, d=8, cross_edge_budget=0.0, seed=5))


@pytest.fixture(scope="session")
def cliques_400():
    """Four disjoint complete clusters (saturated generator), n = 400."""
    return generate_clusterable(GeneratorConfig(n=400, k=4, d=99, cross_edge_budget=0.0, seed=3))


@pytest.fixture(scope="session")
def two_cliques_200():
    return generate_clusterable(GeneratorConfig(n=200, k=2, d=99, cross_edge_budget=0.0, seed=1))


@pytest.fixture(scope="session")
def ref_expanders_400(expanders_400):
    return build_reference(*expanders_400)


@pytest.fixture(scope="session")
def ref_cliques_400(cliques_400):
    return build_reference(*cliques_400)


@pytest.fixture(scope="session")
def ref_two_cliques_200(two_cliques_200):
    return build_reference(*two_cliques_200)


def connected_components(g):
    """Simple BFS component labeling used as an independent oracle."""
    comp = -np.ones(g.n, dtype=np.int64)
    current = 0
    for start in range(g.n):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = current
        while stack:
            v = stack.pop()
            for y in g.adjacency[v]:
                if comp[y] < 0:
                    comp[y] = current
                    stack.append(y)
        current += 1
    return comp, current
