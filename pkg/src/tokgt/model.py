"""Transformer backbone over the four token sequences with adaptive fusion.

Each sequence type runs through its own projection and Transformer stack
(optionally shared); the target node's representation is the first row of the
stack output. The four per-sequence representations are combined by a learned
softmax-weighted convex sum (or plain mean / concatenation), then classified
by a two-layer MLP. Attention never crosses node boundaries: a node's
prediction depends only on its own four sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import DTYPES, Parameter, Tape, Tensor
from .tokens import TokenBundle

SEQ_TYPES = ("ne_t", "ne_a", "no_t", "no_a")
FUSION_MODES = ("adaptive", "mean", "concat")
LAYER_NORM_MODES = ("pre", "none")


@dataclass(frozen=True)
class ModelConfig:
    """Backbone dimensions and switches.

    out_dim / ffn_dim / mlp_dim default (None) to hidden_dim, 2 * hidden_dim
    and the resolved out_dim. layer_norm "none" is the literal residual-only
    layer; "pre" normalizes the inputs of attention and of the feed-forward.
    """

    hidden_dim: int = 64
    out_dim: int | None = None
    fusion_dim: int = 64
    layers: int = 1
    heads: int = 1
    dropout: float = 0.0
    attn_dropout: float = 0.0
    ffn_dim: int | None = None
    mlp_dim: int | None = None
    layer_norm: str = "pre"
    share_encoder: bool = False
    activation: str = "relu"
    precision: str = "single"

    def __post_init__(self):
        if self.hidden_dim < 1 or self.hidden_dim % self.heads != 0:
            raise ValueError(f"hidden_dim {self.hidden_dim} must be positive and divisible by heads {self.heads}")
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        if not (0.0 <= self.dropout < 1.0 and 0.0 <= self.attn_dropout < 1.0):
            raise ValueError("dropout rates must be in [0, 1)")
        if self.fusion_dim < 1:
            raise ValueError(f"fusion_dim must be >= 1, got {self.fusion_dim}")
        if self.layer_norm not in LAYER_NORM_MODES:
            raise ValueError(f"layer_norm must be one of {LAYER_NORM_MODES}, got {self.layer_norm!r}")
        if self.activation not in ad.ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.precision not in DTYPES:
            raise ValueError(f"precision must be one of {tuple(DTYPES)}, got {self.precision!r}")

    @property
    def resolved_out_dim(self) -> int:
        return self.hidden_dim if self.out_dim is None else self.out_dim

    @property
    def resolved_ffn_dim(self) -> int:
        return 2 * self.hidden_dim if self.ffn_dim is None else self.ffn_dim

    @property
    def resolved_mlp_dim(self) -> int:
        return self.resolved_out_dim if self.mlp_dim is None else self.mlp_dim


class ModelParams:
    """All learnable tensors plus the structural facts needed to rebuild them."""

    def __init__(self, config: ModelConfig, d_in: int, n_classes: int,
                 sequences: tuple[str, ...], fusion_mode: str,
                 params: dict[str, Parameter]):
        self.config = config
        self.d_in = d_in
        self.n_classes = n_classes
        self.sequences = tuple(sequences)
        self.fusion_mode = fusion_mode
        self.params = params

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def encoder_key(self, seq: str) -> str:
        return "enc" if self.config.share_encoder else f"enc.{seq}"

    def zero_grads(self):
        for p in self.params.values():
            p.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def restore(self, snap: dict[str, np.ndarray]):
        for name, p in self.params.items():
            p.data[...] = snap[name]


def init_params(config: ModelConfig, d_in: int, n_classes: int, *,
                sequences: tuple[str, ...] = SEQ_TYPES,
                fusion_mode: str = "adaptive", seed: int = 0) -> ModelParams:
    """Seeded parameter initialization.

    Weight matrices draw uniform(+-1/sqrt(fan_in)); biases, layer-norm shifts
    and the second fusion matrix start at zero (so initial fusion weights are
    uniform). Draw order is fixed, making runs reproducible bit-for-bit.
    """
    sequences = tuple(sequences)
    if not sequences or any(s not in SEQ_TYPES for s in sequences):
        raise ValueError(f"sequences must be a nonempty subset of {SEQ_TYPES}, got {sequences}")
    if fusion_mode not in FUSION_MODES:
        raise ValueError(f"fusion_mode must be one of {FUSION_MODES}, got {fusion_mode!r}")
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), 0))))
    dt = DTYPES[config.precision]
    params: dict[str, Parameter] = {}

    def weight(name, fan_in, shape):
        lim = 1.0 / math.sqrt(fan_in)
        params[name] = Parameter(rng.uniform(-lim, lim, shape).astype(dt), name)

    def const(name, shape, value=0.0):
        params[name] = Parameter(np.full(shape, value, dtype=dt), name)

    h0 = config.hidden_dim
    d_out = config.resolved_out_dim
    enc_keys = ["enc"] if config.share_encoder else [f"enc.{s}" for s in sequences]
    for e in enc_keys:
        weight(f"{e}.proj.W", d_in, (d_in, h0))
        for layer in range(config.layers):
            pre = f"{e}.l{layer}"
            for nm in ("Wq", "Wk", "Wv", "Wo"):
                weight(f"{pre}.attn.{nm}", h0, (h0, h0))
            if config.layer_norm == "pre":
                const(f"{pre}.ln1.g", (h0,), 1.0)
                const(f"{pre}.ln1.b", (h0,))
                const(f"{pre}.ln2.g", (h0,), 1.0)
                const(f"{pre}.ln2.b", (h0,))
            ffn = config.resolved_ffn_dim
            weight(f"{pre}.ffn.W1", h0, (h0, ffn))
            const(f"{pre}.ffn.b1", (ffn,))
            weight(f"{pre}.ffn.W2", ffn, (ffn, h0))
            const(f"{pre}.ffn.b2", (h0,))
        if d_out != h0:
            weight(f"{e}.out.W", h0, (h0, d_out))
    if fusion_mode == "adaptive":
        weight("fusion.W0", d_out, (d_out, config.fusion_dim))
        const("fusion.W1", (config.fusion_dim, 1))
    clf_in = d_out * len(sequences) if fusion_mode == "concat" else d_out
    mlp = config.resolved_mlp_dim
    weight("clf.W1", clf_in, (clf_in, mlp))
    const("clf.b1", (mlp,))
    weight("clf.W2", mlp, (mlp, n_classes))
    const("clf.b2", (n_classes,))
    return ModelParams(config, d_in, n_classes, sequences, fusion_mode, params)


class _DropoutSites:
    """Hands out one counter-based generator per dropout site, in call order."""

    def __init__(self, seed: int, step: int):
        self.seed = seed
        self.step = step
        self.index = 0

    def rng(self) -> np.random.Generator:
        g = ad.dropout_generator(self.seed, self.step, self.index)
        self.index += 1
        return g


def _sequence_features(bundle: TokenBundle, x: np.ndarray, seq: str, ids: np.ndarray) -> np.ndarray:
    if seq == "ne_t":
        return bundle.ne_t.data[ids]
    if seq == "ne_a":
        return bundle.ne_a.data[ids]
    if seq == "no_t":
        return x[bundle.no_t.ids[ids]]
    if seq == "no_a":
        return x[bundle.no_a.ids[ids]]
    raise ValueError(f"unknown sequence type {seq!r}")


def _msa(mp: ModelParams, prefix: str, h: Tensor, tape, train, sites, debug=None) -> Tensor:
    cfg = mp.config
    P = mp.params
    q = ad.matmul(h, P[f"{prefix}.attn.Wq"], tape)
    k = ad.matmul(h, P[f"{prefix}.attn.Wk"], tape)
    v = ad.matmul(h, P[f"{prefix}.attn.Wv"], tape)
    dk = cfg.hidden_dim // cfg.heads
    heads = []
    for i in range(cfg.heads):
        lo, hi = i * dk, (i + 1) * dk
        qi = ad.slice_last(q, lo, hi, tape)
        ki = ad.slice_last(k, lo, hi, tape)
        vi = ad.slice_last(v, lo, hi, tape)
        scores = ad.scalar_mul(ad.matmul(qi, ki, tape, transpose_b=True), 1.0 / math.sqrt(dk), tape)
        attn = ad.softmax(scores, tape)
        if debug is not None:
            debug.setdefault("attention", []).append(attn.data.copy())
        attn = ad.dropout(attn, cfg.attn_dropout, tape, train=train, rng=sites.rng())
        heads.append(ad.matmul(attn, vi, tape))
    cat = heads[0] if len(heads) == 1 else ad.concat(heads, tape)
    return ad.matmul(cat, P[f"{prefix}.attn.Wo"], tape)


def _ffn(mp: ModelParams, prefix: str, h: Tensor, tape, train, sites) -> Tensor:
    P = mp.params
    act = ad.ACTIVATIONS[mp.config.activation]
    t = ad.add(ad.matmul(h, P[f"{prefix}.ffn.W1"], tape), P[f"{prefix}.ffn.b1"], tape)
    t = act(t, tape)
    t = ad.dropout(t, mp.config.dropout, tape, train=train, rng=sites.rng())
    return ad.add(ad.matmul(t, P[f"{prefix}.ffn.W2"], tape), P[f"{prefix}.ffn.b2"], tape)


def transformer_layer(mp: ModelParams, enc_key: str, layer: int, h: Tensor,
                      tape=None, train=False, sites=None, debug=None) -> Tensor:
    """One residual block: attention then feed-forward.

    "none" mode adds each sublayer straight onto its input; "pre" mode
    normalizes the sublayer inputs and leaves the residual path untouched.
    """
    P = mp.params
    prefix = f"{enc_key}.l{layer}"
    sites = sites or _DropoutSites(0, 0)
    if mp.config.layer_norm == "pre":
        a_in = ad.layer_norm(h, P[f"{prefix}.ln1.g"], P[f"{prefix}.ln1.b"], tape)
    else:
        a_in = h
    h = ad.add(_msa(mp, prefix, a_in, tape, train, sites, debug), h, tape)
    if mp.config.layer_norm == "pre":
        f_in = ad.layer_norm(h, P[f"{prefix}.ln2.g"], P[f"{prefix}.ln2.b"], tape)
    else:
        f_in = h
    return ad.add(_ffn(mp, prefix, f_in, tape, train, sites), h, tape)


def encode_sequence(mp: ModelParams, seq: str, feats: np.ndarray, tape=None,
                    train=False, sites=None, debug=None) -> Tensor:
    """Project token features, run the stack, return the first-row readout."""
    if feats.shape[-2] < 1:
        raise ValueError("empty token sequence")
    sites = sites or _DropoutSites(0, 0)
    e = mp.encoder_key(seq)
    h = ad.matmul(Tensor(feats), mp.params[f"{e}.proj.W"], tape)
    h = ad.dropout(h, mp.config.dropout, tape, train=train, rng=sites.rng())
    for layer in range(mp.config.layers):
        h = transformer_layer(mp, e, layer, h, tape, train, sites, debug)
    out_key = f"{e}.out.W"
    if out_key in mp.params:
        h = ad.matmul(h, mp.params[out_key], tape)
    return ad.take_first_row(h, tape)


def fusion_weights(mp: ModelParams, z_list: list[Tensor], tape=None) -> Tensor:
    """Softmax-normalized scalar weight per sequence representation, shared head."""
    P = mp.params
    act = ad.ACTIVATIONS[mp.config.activation]
    logits = []
    for z in z_list:
        t = act(ad.matmul(z, P["fusion.W0"], tape), tape)
        logits.append(ad.matmul(t, P["fusion.W1"], tape))
    stacked = logits[0] if len(logits) == 1 else ad.concat(logits, tape)
    return ad.softmax(stacked, tape)


def fuse(z_list: list[Tensor], weights: Tensor, tape=None) -> Tensor:
    """Convex combination of per-sequence representations."""
    acc = None
    for i, z in enumerate(z_list):
        wz = ad.mul(z, ad.slice_last(weights, i, i + 1, tape), tape)
        acc = wz if acc is None else ad.add(acc, wz, tape)
    return acc


def forward(mp: ModelParams, node_ids, bundle: TokenBundle, x: np.ndarray, *,
            tape: Tape | None = None, train: bool = False, seed: int = 0,
            step: int = 0, debug: dict | None = None):
    """Logits for a batch of nodes plus the per-node fusion weights.

    Returns (logits Tensor of shape (B, c), weights ndarray of shape (B, S)
    or None under concat fusion). Node-token features are gathered from the
    raw feature matrix at call time.
    """
    ids = np.asarray(node_ids, dtype=np.int64).reshape(-1)
    if ids.size == 0:
        raise ValueError("empty node batch")
    if ids.min() < 0 or ids.max() >= bundle.n:
        raise ValueError(f"node id out of range for n={bundle.n}")
    dt = DTYPES[mp.config.precision]
    x = np.asarray(x)
    sites = _DropoutSites(seed, step)
    P = mp.params
    act = ad.ACTIVATIONS[mp.config.activation]

    z_list = []
    for seq in mp.sequences:
        feats = _sequence_features(bundle, x, seq, ids).astype(dt, copy=False)
        z_list.append(encode_sequence(mp, seq, feats, tape, train, sites, debug))

    n_seq = len(z_list)
    if mp.fusion_mode == "concat":
        fused = z_list[0] if n_seq == 1 else ad.concat(z_list, tape)
        alpha = None
    elif mp.fusion_mode == "mean":
        acc = ad.scalar_mul(z_list[0], 1.0 / n_seq, tape)
        for z in z_list[1:]:
            acc = ad.add(acc, ad.scalar_mul(z, 1.0 / n_seq, tape), tape)
        fused = acc
        alpha = np.full((ids.size, n_seq), 1.0 / n_seq)
    else:
        w = fusion_weights(mp, z_list, tape)
        fused = fuse(z_list, w, tape)
        alpha = w.data.copy()

    t = ad.add(ad.matmul(fused, P["clf.W1"], tape), P["clf.b1"], tape)
    t = act(t, tape)
    logits = ad.add(ad.matmul(t, P["clf.W2"], tape), P["clf.b2"], tape)
    return logits, alpha
