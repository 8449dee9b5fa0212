"""Synthetic graph generators and stratified splits for desk-scale experiments."""

from __future__ import annotations

import numpy as np

from .graph import Graph, SplitSet, build_graph


def _rng(seed, *stream) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed),) + tuple(stream))))


def _sample_distinct(rng: np.random.Generator, space: int, count: int) -> np.ndarray:
    """`count` distinct uniform draws from range(space), without O(space) memory."""
    if count > space:
        raise ValueError(f"cannot draw {count} distinct values from {space}")
    if count == 0:
        return np.empty(0, dtype=np.int64)
    got = np.unique(rng.integers(0, space, size=int(count * 1.1) + 16, dtype=np.int64))
    while got.size < count:
        extra = rng.integers(0, space, size=count, dtype=np.int64)
        got = np.unique(np.concatenate([got, extra]))
    keep = rng.permutation(got.size)[:count]
    return got[keep]


def _block_edges(rng, nodes_a: np.ndarray, nodes_b: np.ndarray, p: float) -> np.ndarray:
    """Bernoulli(p) edges between two node sets (within a set when a is b)."""
    same = nodes_a is nodes_b
    if same:
        m = nodes_a.size
        space = m * (m - 1) // 2
    else:
        space = nodes_a.size * nodes_b.size
    count = int(rng.binomial(space, p)) if space > 0 and p > 0 else 0
    if count == 0:
        return np.empty((0, 2), dtype=np.int64)
    codes = _sample_distinct(rng, space, count)
    if same:
        # decode lexicographic upper-triangle codes: row i owns (m-1-i) entries
        def row_start(i):
            return i * (2 * m - i - 1) // 2

        b = 2 * m - 1
        i = np.floor((b - np.sqrt(b * b - 8.0 * codes)) / 2.0).astype(np.int64)
        i = np.clip(i, 0, m - 2)
        for _ in range(2):  # absorb float rounding at row boundaries
            i[row_start(i) > codes] -= 1
            i[(i < m - 2) & (row_start(i + 1) <= codes)] += 1
        j = codes - row_start(i) + i + 1
        return np.stack([nodes_a[i], nodes_a[j]], axis=1)
    rows = codes // nodes_b.size
    cols = codes % nodes_b.size
    return np.stack([nodes_a[rows], nodes_b[cols]], axis=1)


def _gaussian_features(rng, labels: np.ndarray, means: np.ndarray) -> np.ndarray:
    noise = rng.standard_normal((labels.size, means.shape[1]))
    return means[labels] + noise


def generate_sbm(n_per_class: int, p_in: float, p_out: float, feature_dim: int,
                 class_mean_separation: float, seed: int) -> tuple[Graph, np.ndarray, np.ndarray]:
    """Two-block stochastic block model with Gaussian class-conditional features.

    Class means sit `class_mean_separation` apart along the first feature
    axis; noise is unit Gaussian. Deterministic under `seed`.
    """
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError(f"need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if n_per_class < 1 or feature_dim < 1:
        raise ValueError("n_per_class and feature_dim must be positive")
    rng = _rng(seed, 0xB10C)
    n = 2 * n_per_class
    labels = np.repeat(np.arange(2), n_per_class).astype(np.int64)
    block0 = np.arange(n_per_class, dtype=np.int64)
    block1 = np.arange(n_per_class,
                       2 * n_per_class, dtype=np.int64)
    edges = np.concatenate([
        _block_edges(rng, block0, block0, p_in),
        _block_edges(rng, block1, block1, p_in),
        _block_edges(rng, block0, block1, p_out),
    ])
    g = build_graph(edges, n)
    means = np.zeros((2, feature_dim))
    means[0, 0] = -class_mean_separation / 2.0
    means[1, 0] = +class_mean_separation / 2.0
    x = _gaussian_features(rng, labels, means)
    return g, x, labels


def generate_feature_label_graph(n_per_class: int, n_classes: int, edge_prob: float,
                                 feature_dim: int, class_mean_separation: float,
                                 seed: int) -> tuple[Graph, np.ndarray, np.ndarray]:
    """Label-independent random edges over feature-determined classes.

    Edges are uniform Erdős–Rényi, so edge homophily sits near 1/n_classes;
    labels are recoverable from the Gaussian features alone (class means are
    mutually `class_mean_separation` apart).
    """
    if not (0.0 <= edge_prob <= 1.0):
        raise ValueError(f"edge_prob must be in [0, 1], got {edge_prob}")
    if n_classes < 2 or feature_dim < n_classes:
        raise ValueError("need n_classes >= 2 and feature_dim >= n_classes")
    rng = _rng(seed, 0xFEA7)
    n = n_classes * n_per_class
    labels = np.repeat(np.arange(n_classes), n_per_class).astype(np.int64)
    all_nodes = np.arange(n, dtype=np.int64)
    edges = _block_edges(rng, all_nodes, all_nodes, edge_prob)
    g = build_graph(edges, n)
    means = np.eye(n_classes, feature_dim) * (class_mean_separation / np.sqrt(2.0))
    x = _gaussian_features(rng, labels, means)
    return g, x, labels


def stratified_splits(y: np.ndarray, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> SplitSet:
    """Per-class shuffled train/val/test split (fractions of each class)."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three values summing to 1, got {fractions}")
    rng = _rng(seed, 0x5B17)
    train, val, test = [], [], []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        n_tr = int(idx.size * fractions[0])
        n_va = int(idx.size * fractions[1])
        train.append(idx[:n_tr])
        val.append(idx[n_tr:n_tr + n_va])
        test.append(idx[n_tr + n_va:])
    splits = SplitSet(
        train=np.sort(np.concatenate(train)).astype(np.int64),
        val=np.sort(np.concatenate(val)).astype(np.int64),
        test=np.sort(np.concatenate(test)).astype(np.int64),
    )
    splits.validate(len(y))
    return splits
