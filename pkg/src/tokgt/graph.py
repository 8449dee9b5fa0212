"""Immutable CSR graph, normalized adjacency, homophily, and the sparse-dense kernel."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph in CSR form.

    Column indices are sorted and duplicate-free within each row, the
    adjacency is symmetric, and no self-loops are stored (self-loops are
    added only by :func:`normalized_adjacency`).
    """

    n: int
    indptr: np.ndarray = field(repr=False)   # int64, length n+1
    indices: np.ndarray = field(repr=False)  # int64, sorted per row
    degrees: np.ndarray = field(repr=False)  # int64, len n

    def __post_init__(self):
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        self.degrees.setflags(write=False)

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return int(self.indices.size) // 2

    def adjacency(self) -> sp.csr_array:
        """0/1 adjacency as a float64 CSR array (no self-loops)."""
        data = np.ones(self.indices.size, dtype=np.float64)
        return sp.csr_array((data, self.indices, self.indptr), shape=(self.n, self.n))

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]


def build_graph(edges, n: int) -> Graph:
    """Build a Graph from an edge list.

    `edges` is an iterable of (u, v) pairs or an (m, 2) integer array.
    Either orientation may appear; reversed duplicates are merged. Node ids
    must lie in [0, n). Self-loops are rejected: they would silently double
    the self-connection the normalized adjacency adds on its own.
    """
    if n <= 0:
        raise ValueError(f"node count must be positive, got {n}")
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if e.size == 0:
        e = e.reshape(0, 2)
    if e.ndim != 2 or e.shape[1] != 2:
        raise ValueError(f"edge list must be (m, 2), got shape {e.shape}")
    if e.size and (e.min() < 0 or e.max() >= n):
        bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
        raise ValueError(f"edge ({bad[0]}, {bad[1]}) out of range for n={n}")
    loops = e[:, 0] == e[:, 1]
    if loops.any():
        u = int(e[loops][0, 0])
        raise ValueError(f"self-loop ({u}, {u}) not allowed in input edge list")

    # Symmetrize and dedup via linear codes over both orientations.
    u = np.concatenate([e[:, 0], e[:, 1]])
    v = np.concatenate([e[:, 1], e[:, 0]])
    codes = np.unique(u * np.int64(n) + v)
    rows = codes // n
    cols = codes % n
    degrees = np.bincount(rows, minlength=n).astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=indptr[1:])
    return Graph(n=n, indptr=indptr, indices=cols.astype(np.int64), degrees=degrees)


def normalized_adjacency(g: Graph) -> sp.csr_array:
    """Self-looped, symmetrically normalized adjacency.

    Entry (i, j) is 1 / sqrt((deg_i + 1) * (deg_j + 1)) for each edge and for
    the diagonal, so isolated nodes get a diagonal entry of exactly 1.
    """
    a = g.adjacency() + sp.eye_array(g.n, format="csr")
    a.sort_indices()
    d = 1.0 / np.sqrt(g.degrees + 1.0)
    rows = np.repeat(np.arange(g.n), np.diff(a.indptr))
    a.data = d[rows] * d[a.indices]
    return a


def spmm(s: sp.csr_array, m: np.ndarray) -> np.ndarray:
    """Sparse @ dense with a fixed per-row accumulation order.

    The CSR kernel reduces each row in column-index order, so repeated calls
    produce byte-identical output.
    """
    m = np.asarray(m)
    if m.ndim != 2 or s.shape[1] != m.shape[0]:
        raise ValueError(f"dimension mismatch: sparse {s.shape} @ dense {m.shape}")
    return np.asarray(s @ m)


def edge_homophily(g: Graph, y: np.ndarray) -> float:
    """Fraction of undirected edges whose endpoints share a label."""
    y = np.asarray(y)
    if y.shape != (g.n,):
        raise ValueError(f"labels must have shape ({g.n},), got {y.shape}")
    if g.num_edges == 0:
        raise ValueError("undefined homophily: graph has no edges")
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    return float(np.mean(y[rows] == y[g.indices]))


def validate_features(x: np.ndarray, n: int | None = None) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError(f"features must be an (n, d) matrix with d >= 1, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"size mismatch: features n={x.shape[0]}, graph n={n}")
    if not np.isfinite(x).all():
        raise ValueError("features contain non-finite values")
    return x


def validate_labels(y: np.ndarray, n: int | None = None) -> int:
    """Check labels are dense in [0, c) and return c."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be a vector, got shape {y.shape}")
    if n is not None and y.shape[0] != n:
        raise ValueError(f"size mismatch: labels n={y.shape[0]}, graph n={n}")
    present = np.unique(y)
    c = int(present[-1]) + 1 if present.size else 0
    if present[0] < 0:
        raise ValueError(f"negative label {present[0]}")
    if c < 2 or present.size != c:
        missing = sorted(set(range(c)) - set(present.tolist()))
        raise ValueError(f"non-dense labels: classes {missing or list(present)} missing from 0..{max(c - 1, 1)}")
    return c


@dataclass(frozen=True)
class SplitSet:
    """Disjoint train/val/test node index sets."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def validate(self, n: int) -> None:
        if self.train.size == 0:
            raise ValueError("train split is empty")
        seen = np.concatenate([self.train, self.val, self.test])
        if seen.size and (seen.min() < 0 or seen.max() >= n):
            raise ValueError(f"split index out of range for n={n}")
        if np.unique(seen).size != seen.size:
            raise ValueError("splits overlap or contain duplicates")
