import numpy as np
import pytest
from hypothesis import strategies as st

import lapsparse as lp


@pytest.fixture
def k3():
    return lp.complete_graph(3)


@pytest.fixture
def path3():
    return lp.path_graph(3)


@pytest.fixture
def single_edge():
    return lp.from_edge_pairs(np.array([[0, 1]]))


@pytest.fixture
def star5():
    return lp.star_graph(5)


@pytest.fixture
def er10():
    return lp.erdos_renyi_graph(10, mean_degree=3.0, seed=1)


@st.composite
def edge_lists(draw, max_nodes=8, max_edges=24):
    """Raw integer pair lists; ids are arbitrary and may repeat."""
    pairs = draw(
        st.lists(
            st.tuples(st.integers(0, max_nodes - 1), st.integers(0, max_nodes - 1)),
            min_size=1,
            max_size=max_edges,
        )
    )
    return pairs


@st.composite
def small_graphs(draw, max_nodes=8, max_edges=24, self_loops=st.booleans()):
    """Valid compacted graphs built the same way the loader builds them."""
    pairs = draw(edge_lists(max_nodes=max_nodes, max_edges=max_edges))
    compact: dict[int, int] = {}
    edges = []
    for a, b in pairs:
        for raw in (a, b):
            if raw not in compact:
                compact[raw] = len(compact)
        edges.append((compact[a], compact[b]))
    add_loops = draw(self_loops)
    return lp.from_edge_pairs(np.array(edges), n=len(compact), add_self_loops=add_loops)
