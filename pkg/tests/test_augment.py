import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import graphs
from genhop.augment import STRATEGIES, AugmentSpec, augment
from genhop.graph import complete_graph, cycle_graph, from_edge_list


def _featured(m=10):
    rng = np.random.default_rng(0)
    edges = [(i, (i + 1) % m) for i in range(m)] + [(0, m // 2)]
    return from_edge_list(m, edges, node_features=rng.normal(size=(m, 4)) + 5,
                          edge_features=rng.normal(size=(m + 1, 2)) + 5)


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_ratio_zero_is_identity(strategy):
    g = _featured()
    assert augment(g, AugmentSpec(strategy, 0.0), 3) == g


def test_edge_drop_all_of_k3():
    out = augment(complete_graph(3), AugmentSpec("EdgeDrop", 1.0), 0)
    assert out.num_nodes == 3 and out.num_edges == 0


def test_node_drop_mean_kept():
    g = cycle_graph(10)
    kept = [augment(g, AugmentSpec("NodeDrop", 0.2), s).num_nodes for s in range(10_000)]
    assert abs(np.mean(kept) - 8) <= 0.1


def test_node_drop_keeps_one_node():
    out = augment(cycle_graph(4), AugmentSpec("NodeDrop", 1.0), 0)
    assert out.num_nodes == 1


def test_node_drop_origin_and_reindexing():
    g = _featured()
    out = augment(g, AugmentSpec("NodeDrop", 0.3), 5)
    assert out.num_nodes == 7
    assert np.array_equal(out.x, g.x[out.origin])
    kept = set(out.origin.tolist())
    want = {(int(np.flatnonzero(out.origin == u)[0]), int(np.flatnonzero(out.origin == v)[0]))
            for u, v in g.edges.tolist() if u in kept and v in kept}
    assert set(map(tuple, out.edges.tolist())) == want


def test_edge_drop_count():
    g = _featured()
    out = augment(g, AugmentSpec("EdgeDrop", 0.2), 1)
    assert out.num_edges == g.num_edges - 3
    assert out.edge_set() <= g.edge_set()


def test_rws_is_connected_walk_subgraph():
    g = _featured(12)
    for s in range(20):
        out = augment(g, AugmentSpec("RWS", 0.5, walk_length=4), s)
        assert 1 <= out.num_nodes <= 5
        h = nx.Graph()
        h.add_nodes_from(range(out.num_nodes))
        h.add_edges_from(out.edges.tolist())
        assert nx.is_connected(h)


def test_feature_dropout_rate():
    g = from_edge_list(200, [], node_features=np.ones((200, 50)))
    out = augment(g, AugmentSpec("FeatDropout", 0.3), 0)
    assert abs((out.x == 0).mean() - 0.3) < 0.02
    assert out.edge_set() == g.edge_set()


def test_feature_mask_zeroes_whole_columns():
    g = _featured()
    for s in range(10):
        out = augment(g, AugmentSpec("FeatMask", 0.5), s)
        for c in range(out.x.shape[1]):
            col = out.x[:, c]
            assert (col == 0).all() or np.array_equal(col, g.x[:, c])


def test_edge_attr_mask_zeroes_rows():
    g = _featured()
    out = augment(g, AugmentSpec("EdgeAttrMask", 0.5), 2)
    zero_rows = (out.edge_attr == 0).all(axis=1)
    assert zero_rows.any()
    assert np.array_equal(out.edge_attr[~zero_rows], g.edge_attr[~zero_rows])


@given(graphs(min_nodes=1, max_nodes=8, with_features=True), st.sampled_from(STRATEGIES),
       st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_pure_and_nonempty(g, strategy, ratio, seed):
    spec = AugmentSpec(strategy, ratio)
    a, b = augment(g, spec, seed), augment(g, spec, seed)
    assert a == b
    assert a.num_nodes >= 1


def test_invalid_specs():
    with pytest.raises(ValueError):
        AugmentSpec("Shuffle", 0.1)
    with pytest.raises(ValueError):
        AugmentSpec("NodeDrop", 1.5)
    with pytest.raises(ValueError):
        AugmentSpec("RWS", 0.2, walk_length=0)
