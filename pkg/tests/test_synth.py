import numpy as np
import pytest

from tokgt.graph import edge_homophily
from tokgt.synth import generate_feature_label_graph, generate_sbm, stratified_splits


def test_disjoint_cliques_full_homophily():
    g, x, y = generate_sbm(2, 1.0, 0.0, 3, 1.0, seed=0)
    assert g.n == 4
    assert edge_homophily(g, y) == 1.0
    # p_in=1 means both blocks are complete
    assert g.degrees.tolist() == [1, 1, 1, 1]


def test_equal_probabilities_give_half_homophily():
    vals = []
    for seed in range(20):
        g, _, y = generate_sbm(40, 0.2, 0.2, 2, 1.0, seed=seed)
        vals.append(edge_homophily(g, y))
    assert abs(np.mean(vals) - 0.5) < 0.05


def test_sbm_deterministic_under_seed():
    a = generate_sbm(50, 0.1, 0.02, 4, 1.5, seed=9)
    b = generate_sbm(50, 0.1, 0.02, 4, 1.5, seed=9)
    assert np.array_equal(a[0].indices, b[0].indices)
    assert np.array_equal(a[0].indptr, b[0].indptr)
    assert a[1].tobytes() == b[1].tobytes()
    assert np.array_equal(a[2], b[2])
    c = generate_sbm(50, 0.1, 0.02, 4, 1.5, seed=10)
    assert not np.array_equal(a[0].indices, c[0].indices)


def test_sbm_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        generate_sbm(10, 0.1, 0.5, 2, 1.0, seed=0)
    with pytest.raises(ValueError):
        generate_sbm(10, 1.5, 0.1, 2, 1.0, seed=0)


def test_sbm_feature_separation():
    g, x, y = generate_sbm(500, 0.01, 0.01, 6, 2.0, seed=3)
    gap = x[y == 1, 0].mean() - x[y == 0, 0].mean()
    assert abs(gap - 2.0) < 0.2
    assert abs(x[:, 1].mean()) < 0.2


def test_feature_label_graph_low_homophily():
    g, x, y = generate_feature_label_graph(80, 4, 0.03, 8, 2.0, seed=1)
    assert g.n == 320
    h = edge_homophily(g, y)
    assert h < 0.35  # 4 classes, label-blind edges: expect about 0.25


def test_feature_label_graph_needs_enough_dims():
    with pytest.raises(ValueError):
        generate_feature_label_graph(10, 4, 0.1, 2, 1.0, seed=0)


def test_stratified_splits_disjoint_and_proportional():
    y = np.repeat([0, 1, 2], 100)
    s = stratified_splits(y, seed=4)
    all_ids = np.concatenate([s.train, s.val, s.test])
    assert np.unique(all_ids).size == 300
    assert s.train.size == 180 and s.val.size == 60 and s.test.size == 60
    for part in (s.train, s.val, s.test):
        counts = np.bincount(y[part], minlength=3)
        assert counts.min() == counts.max()  # perfectly stratified here


def test_stratified_splits_deterministic():
    y = np.repeat([0, 1], 50)
    a = stratified_splits(y, seed=7)
    b = stratified_splits(y, seed=7)
    assert np.array_equal(a.train, b.train)
    assert np.array_equal(a.test, b.test)


def test_stratified_splits_fraction_validation():
    with pytest.raises(ValueError):
        stratified_splits(np.array([0, 1]), fractions=(0.5, 0.2, 0.2), seed=0)
