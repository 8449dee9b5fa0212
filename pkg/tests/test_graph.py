import numpy as np
import pytest

from conftest import make_random_graph
from oracles import dense_normalized_adjacency
from tokgt.graph import (build_graph, edge_homophily, normalized_adjacency, spmm,
                         validate_labels)


def test_build_path_dedups_and_symmetrizes(path_graph):
    assert path_graph.n == 3
    assert path_graph.degrees.tolist() == [1, 2, 1]
    assert path_graph.num_edges == 2
    assert path_graph.neighbors(1).tolist() == [0, 2]


def test_build_empty_single_node():
    g = build_graph([], 1)
    assert g.degrees.tolist() == [0]
    assert g.num_edges == 0


def test_build_rejects_self_loop():
    with pytest.raises(ValueError, match="self-loop"):
        build_graph([(0, 0)], 1)


def test_build_rejects_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        build_graph([(0, 3)], 3)


def test_build_insertion_order_irrelevant():
    e1 = [(0, 1), (2, 1), (0, 2)]
    e2 = [(2, 0), (1, 0), (1, 2)]
    g1, g2 = build_graph(e1, 3), build_graph(e2, 3)
    assert np.array_equal(g1.indptr, g2.indptr)
    assert np.array_equal(g1.indices, g2.indices)


def test_normalized_adjacency_isolated_node():
    g = build_graph([], 1)
    assert normalized_adjacency(g).toarray()[0, 0] == 1.0


def test_normalized_adjacency_path_values(path_graph):
    a = normalized_adjacency(path_graph).toarray()
    assert a[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert a[0, 1] == pytest.approx(1 / np.sqrt(6), abs=1e-15)
    assert a[1, 1] == pytest.approx(1 / 3, abs=1e-15)
    assert a[1, 2] == pytest.approx(1 / np.sqrt(6), abs=1e-15)
    assert a[2, 2] == pytest.approx(0.5, abs=1e-15)
    assert np.abs(a - a.T).max() == 0.0


def test_normalized_adjacency_matches_dense_oracle():
    rng = np.random.default_rng(10)
    for n in (2, 7, 21, 40):
        g, a = make_random_graph(rng, n, 0.25)
        got = normalized_adjacency(g).toarray()
        want = dense_normalized_adjacency(a)
        assert np.abs(got - want).max() < 1e-14


def test_normalized_adjacency_value_range_and_symmetry():
    rng = np.random.default_rng(11)
    for n in (3, 16, 33):
        g, _ = make_random_graph(rng, n, 0.3)
        s = normalized_adjacency(g)
        assert np.abs((s - s.T).toarray()).max() == 0.0
        assert s.data.min() > 0.0
        assert s.data.max() <= 1.0


def test_normalized_adjacency_regular_row_sums():
    # 4-cycle: every node degree 2, rows sum to exactly 1 up to rounding
    g = build_graph([(0, 1), (1, 2), (2, 3), (3, 0)], 4)
    sums = normalized_adjacency(g).toarray().sum(axis=1)
    assert np.all(sums <= 1.0 + 1e-12)
    assert np.abs(sums - 1.0).max() < 1e-12


def test_spmm_identity_and_zero():
    import scipy.sparse as sp

    m = np.arange(12.0).reshape(4, 3)
    eye = sp.eye_array(4, format="csr")
    assert np.array_equal(spmm(eye, m), m)
    zero = sp.csr_array((4, 4))
    assert np.array_equal(spmm(zero, m), np.zeros((4, 3)))


def test_spmm_matches_dense_oracle():
    rng = np.random.default_rng(12)
    g, a = make_random_graph(rng, 16, 0.3)
    s = normalized_adjacency(g)
    m = rng.random((16, 4))
    assert np.abs(spmm(s, m) - dense_normalized_adjacency(a) @ m).max() < 1e-12


def test_spmm_oracle_many_small_graphs():
    rng = np.random.default_rng(13)
    for _ in range(10):
        n = int(rng.integers(2, 65))
        g, a = make_random_graph(rng, n, 0.2)
        s = normalized_adjacency(g)
        m = rng.standard_normal((n, 3))
        assert np.abs(spmm(s, m) - dense_normalized_adjacency(a) @ m).max() < 1e-12


def test_spmm_dimension_mismatch():
    g = build_graph([(0, 1)], 2)
    with pytest.raises(ValueError, match="dimension mismatch"):
        spmm(normalized_adjacency(g), np.ones((3, 2)))


def test_spmm_deterministic():
    rng = np.random.default_rng(14)
    g, _ = make_random_graph(rng, 50, 0.2)
    s = normalized_adjacency(g)
    m = rng.random((50, 8))
    assert spmm(s, m).tobytes() == spmm(s, m).tobytes()


def test_edge_homophily_path(path_graph):
    assert edge_homophily(path_graph, np.array([0, 0, 1])) == 0.5


def test_edge_homophily_all_same(path_graph):
    assert edge_homophily(path_graph, np.zeros(3, dtype=int)) == 1.0


def test_edge_homophily_no_edges():
    g = build_graph([], 2)
    with pytest.raises(ValueError, match="undefined homophily"):
        edge_homophily(g, np.array([0, 1]))


def test_edge_homophily_label_permutation_invariant():
    rng = np.random.default_rng(15)
    g, _ = make_random_graph(rng, 30, 0.2)
    y = rng.integers(0, 4, 30)
    perm = rng.permutation(4)
    assert edge_homophily(g, y) == edge_homophily(g, perm[y])


def test_validate_labels_dense():
    assert validate_labels(np.array([0, 1, 2, 1])) == 3
    with pytest.raises(ValueError, match="non-dense"):
        validate_labels(np.array([0, 2, 2]))
