import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avgproc import graph_core


def test_hypercube_d1_is_single_edge():
    g = graph_core.hypercube(1)
    assert g.n == 2
    assert g.n_edges == 1
    assert g.edges.tolist() == [[0, 1]]


def test_hypercube_counts():
    assert graph_core.hypercube(3).n_edges == 12
    assert graph_core.hypercube(10).n_edges == 5120
    assert graph_core.hypercube(3).edges.shape == (12, 2)


def test_hypercube_edges_are_unit_hamming():
    g = graph_core.hypercube(4)
    e = g.edges
    diff = np.bitwise_xor(e[:, 0], e[:, 1])
    # each edge flips exactly one bit
    assert np.all(np.bitwise_count(diff.astype(np.uint64)) == 1)
    assert np.all(e[:, 0] < e[:, 1])
    # no duplicates
    keys = e[:, 0].astype(np.int64) * g.n + e[:, 1]
    assert len(np.unique(keys)) == g.n_edges


def test_hypercube_validation():
    with pytest.raises(ValueError):
        graph_core.hypercube(0)
    with pytest.raises(ValueError):
        graph_core.hypercube(31)
    with pytest.raises(ValueError):
        graph_core.hypercube(2.5)
    with pytest.raises(ValueError):
        graph_core.hypercube(True)


def test_bipartite_single_edge():
    g = graph_core.complete_bipartite(1, 1)
    assert g.n == 2
    assert g.edges.tolist() == [[0, 1]]


def test_bipartite_star():
    g = graph_core.complete_bipartite(1, 4)
    assert g.n_edges == 4
    assert sorted(g.edges[:, 0].tolist()) == [0, 0, 0, 0]


def test_bipartite_counts_and_parts():
    g = graph_core.complete_bipartite(2, 3)
    assert g.n_edges == 6
    e = g.edges
    assert np.all(e[:, 0] < 2) and np.all(e[:, 1] >= 2)
    assert g.part_of(0) == 0
    assert g.part_of(4) == 1
    with pytest.raises(ValueError):
        g.part_of(5)


def test_bipartite_validation():
    with pytest.raises(ValueError):
        graph_core.complete_bipartite(3, 2)
    with pytest.raises(ValueError):
        graph_core.complete_bipartite(0, 2)


def test_complete_counts():
    g = graph_core.complete(5)
    assert g.n_edges == 10
    assert len(g.edges) == 10


def test_degrees_hypercube():
    g = graph_core.hypercube(4)
    deg, mean = graph_core.degree_stats(g)
    assert np.all(deg == 4)
    assert mean == 4.0


def test_degrees_bipartite():
    g = graph_core.complete_bipartite(2, 3)
    deg, mean = graph_core.degree_stats(g)
    assert deg.tolist() == [3, 3, 2, 2, 2]
    assert mean == 2 * 6 / 5
    # agrees with an edge count
    counts = np.bincount(g.edges.ravel(), minlength=g.n)
    assert np.array_equal(counts, deg)


def test_degrees_complete():
    _, mean = graph_core.degree_stats(graph_core.complete(7))
    assert mean == 6.0


def test_relaxation_times():
    assert graph_core.relaxation_time(graph_core.hypercube(5)) == 1.0
    assert graph_core.relaxation_time(graph_core.complete_bipartite(3, 9)) == 2.0 / 3.0
    assert graph_core.relaxation_time(graph_core.complete(10)) == 0.2


@pytest.mark.parametrize("n", [3, 4, 5])
def test_complete_relaxation_vs_eigensolve(n):
    g = graph_core.complete(n)
    L = graph_core.walk_generator_dense(g)
    vals = np.linalg.eigvalsh(-L)
    gap = np.sort(vals)[1]
    assert graph_core.relaxation_time(g) == pytest.approx(1.0 / gap, rel=1e-12)


def test_walk_generator_dense():
    g = graph_core.complete_bipartite(2, 3)
    L = graph_core.walk_generator_dense(g)
    assert np.allclose(L.sum(axis=1), 0.0, atol=1e-15)
    assert np.array_equal(L, L.T)
    assert L[0, 2] == 0.5
    assert L[0, 1] == 0.0


def test_edges_are_frozen():
    g = graph_core.hypercube(3)
    with pytest.raises(ValueError):
        g.edges[0, 0] = 7


@settings(max_examples=30, deadline=None)
@given(d=st.integers(min_value=1, max_value=6))
def test_hypercube_degree_property(d):
    g = graph_core.hypercube(d)
    counts = np.bincount(g.edges.ravel(), minlength=g.n)
    assert np.all(counts == d)


@settings(max_examples=30, deadline=None)
@given(m=st.integers(min_value=1, max_value=6), extra=st.integers(min_value=0, max_value=6))
def test_bipartite_edges_cross_parts(m, extra):
    k = m + extra
    g = graph_core.complete_bipartite(m, k)
    e = g.edges
    assert len(e) == m * k
    assert np.all(e[:, 0] < m)
    assert np.all(e[:, 1] >= m)
