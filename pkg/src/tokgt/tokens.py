"""Composite token generation: per-node neighborhood and node token sequences.

Every node gets four sequences: hop-aggregated neighborhood features under a
topology view (normalized-adjacency powers) and an attribute view (cosine
edge-weighted adjacency powers), plus two lists of similar-node ids picked by
personalized-PageRank scores and by raw-feature cosine scores. Score matrices
are never materialized at full n x n size; everything is computed per block
of target nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .graph import Graph, spmm, validate_features

VIEW_TOPOLOGY = "topology"
VIEW_ATTRIBUTE = "attribute"

_BLOCK_TARGETS = 512        # target nodes scored at once
_EDGE_CHUNK_ELEMS = 8_388_608  # gathered feature elements per cosine-weight chunk


@dataclass(frozen=True)
class Node2ParConfig:
    """Token generation settings.

    hops: max neighborhood range K (sequence length K+1)
    topk: similar nodes per node-token sequence (sequence length topk+1)
    ppr_damping: restart-walk damping r in (0, 1)
    ppr_steps: propagation steps for the PPR estimate
    attr_adj_normalize: row-normalize the cosine-weighted adjacency
    """

    hops: int
    topk: int
    ppr_damping: float = 0.85
    ppr_steps: int = 2
    attr_adj_normalize: bool = False

    def __post_init__(self):
        if self.hops < 0:
            raise ValueError(f"hops must be >= 0, got {self.hops}")
        if self.topk < 1:
            raise ValueError(f"topk must be >= 1, got {self.topk}")
        if not (0.0 < self.ppr_damping < 1.0):
            raise ValueError(f"ppr_damping must be in (0, 1), got {self.ppr_damping}")
        if self.ppr_steps < 1:
            raise ValueError(f"ppr_steps must be >= 1, got {self.ppr_steps}")


@dataclass(frozen=True)
class NeighborhoodTokens:
    """Dense (n, K+1, d) hop aggregates; slice 0 is the raw feature matrix."""

    view: str
    data: np.ndarray = field(repr=False)

    @property
    def seq_len(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class NodeTokens:
    """(n, topk+1) similar-node ids; column 0 is the node itself."""

    view: str
    ids: np.ndarray = field(repr=False)

    @property
    def seq_len(self) -> int:
        return self.ids.shape[1]


@dataclass(frozen=True)
class TokenBundle:
    ne_t: NeighborhoodTokens
    ne_a: NeighborhoodTokens
    no_t: NodeTokens
    no_a: NodeTokens
    config: Node2ParConfig

    @property
    def n(self) -> int:
        return self.ne_t.data.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.ne_t.data.shape[2]


def _propagated(op: sp.csr_array, x: np.ndarray, hops: int, view: str) -> NeighborhoodTokens:
    n, d = x.shape
    out = np.empty((n, hops + 1, d), dtype=x.dtype)
    out[:, 0] = x
    cur = x.astype(np.float64, copy=False)
    for k in range(1, hops + 1):
        cur = spmm(op, cur)
        out[:, k] = cur.astype(x.dtype, copy=False)
    return NeighborhoodTokens(view=view, data=out)


def neighborhood_tokens_topology(a_hat: sp.csr_array, x: np.ndarray, hops: int) -> NeighborhoodTokens:
    """Hop-k slice is a_hat^k @ x, built by repeated spmm (powers never formed)."""
    if hops < 0:
        raise ValueError(f"hops must be >= 0, got {hops}")
    x = validate_features(x, a_hat.shape[0])
    return _propagated(a_hat, x, hops, VIEW_TOPOLOGY)


def attribute_weighted_adjacency(g: Graph, x: np.ndarray, normalize: bool = False) -> sp.csr_array:
    """Adjacency with each edge weighted by the endpoints' feature cosine.

    Evaluated on existing edges only. Zero-norm feature rows score 0 against
    everything; signed values are kept. With `normalize`, each row is divided
    by its absolute sum (all-zero rows left untouched).
    """
    x = validate_features(x, g.n)
    x64 = x.astype(np.float64, copy=False)
    norms = np.linalg.norm(x64, axis=1)
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    cols = g.indices
    values = np.empty(cols.size, dtype=np.float64)
    chunk = max(1024, _EDGE_CHUNK_ELEMS // x.shape[1])
    for start in range(0, cols.size, chunk):
        end = min(start + chunk, cols.size)
        r, c = rows[start:end], cols[start:end]
        dots = np.einsum("ij,ij->i", x64[r], x64[c])
        denom = norms[r] * norms[c]
        values[start:end] = np.divide(dots, denom, out=np.zeros(end - start), where=denom > 0)
    if normalize:
        rowsum = np.bincount(rows, weights=np.abs(values), minlength=g.n)
        scale = np.divide(1.0, rowsum, out=np.ones(g.n), where=rowsum > 0)
        values = values * scale[rows]
    return sp.csr_array((values, cols.copy(), g.indptr.copy()), shape=(g.n, g.n))


def neighborhood_tokens_attribute(a_attr: sp.csr_array, x: np.ndarray, hops: int) -> NeighborhoodTokens:
    """Hop-k slice is (cosine-weighted adjacency)^k @ x, slice 0 is x."""
    if hops < 0:
        raise ValueError(f"hops must be >= 0, got {hops}")
    x = validate_features(x, a_attr.shape[0])
    return _propagated(a_attr, x, hops, VIEW_ATTRIBUTE)


def _ppr_block(a_hat: sp.csr_array, targets: np.ndarray, r: float, steps: int) -> np.ndarray:
    """Restart-walk score rows for a block of target nodes, densified at the end.

    Row i starts from a_hat's row i and mixes in (1 - r) of the one-hot seed
    each step; symmetry of a_hat lets the whole block advance with sparse
    row-times-matrix products.
    """
    b = targets.size
    scores = sp.csr_array(a_hat[targets, :])
    seed = sp.csr_array(
        (np.full(b, 1.0 - r), (np.arange(b), targets)), shape=(b, a_hat.shape[0])
    )
    for _ in range(steps):
        scores = (scores @ a_hat) * r + seed
    return scores.toarray()


def ppr_score_row(a_hat: sp.csr_array, i: int, cfg: Node2ParConfig) -> np.ndarray:
    """Personalized-PageRank proximity of every node to node i."""
    n = a_hat.shape[0]
    if not 0 <= i < n:
        raise ValueError(f"node id {i} out of range for n={n}")
    return _ppr_block(a_hat, np.array([i]), cfg.ppr_damping, cfg.ppr_steps)[0]


def cosine_score_row(x: np.ndarray, i: int) -> np.ndarray:
    """Cosine similarity of node i's raw features against all nodes."""
    x = validate_features(x)
    n = x.shape[0]
    if not 0 <= i < n:
        raise ValueError(f"node id {i} out of range for n={n}")
    xn = _unit_rows(x.astype(np.float64, copy=False))
    return xn @ xn[i]


def _unit_rows(x64: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x64, axis=1, keepdims=True)
    return np.divide(x64, norms, out=np.zeros_like(x64), where=norms > 0)


def top_k_select(scores: np.ndarray, self_id: int, n_k: int) -> np.ndarray:
    """Ids of the n_k best scores, self excluded.

    Descending score, ties broken by ascending id — the deterministic order
    token caches rely on.
    """
    s = np.asarray(scores, dtype=np.float64)
    n = s.shape[0]
    if not 0 <= self_id < n:
        raise ValueError(f"self id {self_id} out of range for n={n}")
    if n_k >= n:
        raise ValueError(f"topk must be < node count, got topk={n_k}, n={n}")
    work = s.copy()
    work[self_id] = -np.inf
    kth = n - n_k
    threshold = work[np.argpartition(work, kth)[kth:]].min()
    chosen = np.flatnonzero(work > threshold)
    need = n_k - chosen.size
    if need > 0:
        at_threshold = np.flatnonzero(work == threshold)[:need]
        chosen = np.concatenate([chosen, at_threshold])
    order = np.lexsort((chosen, -work[chosen]))
    return chosen[order].astype(np.int64)


def _select_block(ids_out: np.ndarray, targets: np.ndarray, score_rows: np.ndarray, n_k: int) -> None:
    for bi, i in enumerate(targets):
        ids_out[i, 1:] = top_k_select(score_rows[bi], int(i), n_k)


def node_tokens_topology(a_hat: sp.csr_array, cfg: Node2ParConfig,
                         block: int = _BLOCK_TARGETS) -> NodeTokens:
    n = a_hat.shape[0]
    ids = np.empty((n, cfg.topk + 1), dtype=np.int64)
    ids[:, 0] = np.arange(n)
    for start in range(0, n, block):
        targets = np.arange(start, min(start + block, n))
        rows = _ppr_block(a_hat, targets, cfg.ppr_damping, cfg.ppr_steps)
        _select_block(ids, targets, rows, cfg.topk)
    return NodeTokens(view=VIEW_TOPOLOGY, ids=ids)


def node_tokens_attribute(x: np.ndarray, cfg: Node2ParConfig,
                          block: int = _BLOCK_TARGETS) -> NodeTokens:
    x = validate_features(x)
    n = x.shape[0]
    xn = _unit_rows(x.astype(np.float64, copy=False))
    ids = np.empty((n, cfg.topk + 1), dtype=np.int64)
    ids[:, 0] = np.arange(n)
    for start in range(0, n, block):
        targets = np.arange(start, min(start + block, n))
        rows = xn[targets] @ xn.T
        _select_block(ids, targets, rows, cfg.topk)
    return NodeTokens(view=VIEW_ATTRIBUTE, ids=ids)


def generate_bundle(g: Graph, x: np.ndarray, cfg: Node2ParConfig) -> TokenBundle:
    """Run all four token generators. Deterministic given (graph, features, config)."""
    from .graph import normalized_adjacency

    x = validate_features(x, g.n)
    if cfg.topk >= g.n:
        raise ValueError(f"topk must be < node count, got topk={cfg.topk}, n={g.n}")
    a_hat = normalized_adjacency(g)
    ne_t = neighborhood_tokens_topology(a_hat, x, cfg.hops)
    a_attr = attribute_weighted_adjacency(g, x, cfg.attr_adj_normalize)
    ne_a = neighborhood_tokens_attribute(a_attr, x, cfg.hops)
    no_t = node_tokens_topology(a_hat, cfg)
    no_a = node_tokens_attribute(x, cfg)
    return TokenBundle(ne_t=ne_t, ne_a=ne_a, no_t=no_t, no_a=no_a, config=cfg)


def bundle_config_trimmed(cfg: Node2ParConfig, *, hops: int | None = None,
                          topk: int | None = None) -> Node2ParConfig:
    """Copy of cfg with selected fields replaced (sweep plumbing)."""
    kwargs = {}
    if hops is not None:
        kwargs["hops"] = hops
    if topk is not None:
        kwargs["topk"] = topk
    return replace(cfg, **kwargs)
