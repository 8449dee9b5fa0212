"""Optimization loop, evaluation, multi-seed aggregation, ablations, sweeps."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tape, cross_entropy_mean
from .graph import Graph, SplitSet
from .model import FUSION_MODES, SEQ_TYPES, ModelConfig, ModelParams, forward, init_params
from .tokens import Node2ParConfig, TokenBundle, generate_bundle


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loop settings; `sequences` masks which token sequences feed the model."""

    lr: float = 1e-3
    weight_decay: float = 1e-5
    batch_size: int = 1024
    max_epochs: int = 500
    patience: int = 50
    seed: int = 0
    fusion_mode: str = "adaptive"
    sequences: tuple[str, ...] = SEQ_TYPES

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(self.sequences))
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.lr < 0 or self.weight_decay < 0:
            raise ValueError("lr and weight_decay must be >= 0")
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(f"fusion_mode must be one of {FUSION_MODES}, got {self.fusion_mode!r}")
        if not self.sequences or any(s not in SEQ_TYPES for s in self.sequences):
            raise ValueError(f"sequences must be a nonempty subset of {SEQ_TYPES}, got {self.sequences}")


class AdamWState:
    """First/second moment estimates per parameter plus the shared step counter."""

    def __init__(self, params):
        self.m = {p.name: np.zeros_like(p.data) for p in params}
        self.v = {p.name: np.zeros_like(p.data) for p in params}
        self.step = 0


def adamw_step(params, state: AdamWState, lr: float, weight_decay: float,
               beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One decoupled-weight-decay step over `params` using their .grad fields.

    Decay multiplies the weights by (1 - lr * wd) before the bias-corrected
    adaptive update, independent of the gradient path.
    """
    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    for p in params:
        g = p.grad
        m = state.m[p.name]
        v = state.v[p.name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        if weight_decay != 0.0:
            p.data *= 1.0 - lr * weight_decay
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


@dataclass
class Metrics:
    """Per-run record: loss/accuracy curves, best-epoch bookkeeping, fusion weights."""

    seed: int
    train_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = 0.0
    test_acc: float = 0.0
    epochs_run: int = 0
    fusion_weights: dict | None = None


def evaluate(mp: ModelParams, bundle: TokenBundle, x: np.ndarray, y: np.ndarray,
             ids: np.ndarray, batch_size: int = 4096) -> float:
    """Accuracy of argmax predictions over `ids` (argmax ties go to the lowest class)."""
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if ids.size == 0:
        raise ValueError("evaluate called with an empty id set")
    correct = 0
    for lo in range(0, ids.size, batch_size):
        batch = ids[lo:lo + batch_size]
        logits, _ = forward(mp, batch, bundle, x)
        pred = np.argmax(logits.data, axis=1)
        correct += int((pred == y[batch]).sum())
    return correct / ids.size


def mean_fusion_weights(mp: ModelParams, bundle: TokenBundle, x: np.ndarray,
                        ids: np.ndarray, batch_size: int = 4096) -> dict | None:
    """Per-sequence fusion weight averaged over `ids`; None under concat fusion."""
    if mp.fusion_mode == "concat":
        return None
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    total = np.zeros(len(mp.sequences))
    for lo in range(0, ids.size, batch_size):
        batch = ids[lo:lo + batch_size]
        _, alpha = forward(mp, batch, bundle, x)
        total += alpha.sum(axis=0)
    mean = total / ids.size
    return {seq: float(w) for seq, w in zip(mp.sequences, mean)}


def _shuffle_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), 2))))


def train(mp: ModelParams, bundle: TokenBundle, x: np.ndarray, y: np.ndarray,
          splits: SplitSet, cfg: TrainConfig) -> Metrics:
    """Mini-batch loop with early stopping on best validation accuracy.

    Returns metrics and leaves `mp` holding the best-validation-epoch
    parameters. Bit-identical across runs for identical inputs and seed.
    """
    if splits.train.size == 0:
        raise ValueError("train split is empty")
    if splits.val.size == 0:
        raise ValueError("val split is empty (early stopping needs one)")
    params = mp.parameters()
    state = AdamWState(params)
    rng = _shuffle_rng(cfg.seed)
    metrics = Metrics(seed=cfg.seed)
    best_snap = mp.snapshot()
    best_acc = -1.0
    best_epoch = 0
    step = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(splits.train)
        loss_sum = 0.0
        for lo in range(0, order.size, cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            mp.zero_grads()
            tape = Tape()
            logits, _ = forward(mp, batch, bundle, x, tape=tape, train=True,
                                seed=cfg.seed, step=step)
            loss = cross_entropy_mean(logits, y[batch], tape)
            tape.backward(loss)
            adamw_step(params, state, cfg.lr, cfg.weight_decay)
            loss_sum += float(loss.data) * batch.size
            step += 1
        metrics.train_loss.append(loss_sum / order.size)
        val_acc = evaluate(mp, bundle, x, y, splits.val)
        metrics.val_acc.append(val_acc)
        metrics.epochs_run = epoch
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_snap = mp.snapshot()
        elif epoch - best_epoch >= cfg.patience:
            break
    mp.restore(best_snap)
    metrics.best_epoch = best_epoch
    metrics.best_val_acc = best_acc
    metrics.test_acc = evaluate(mp, bundle, x, y, splits.test) if splits.test.size else 0.0
    eval_ids = splits.test if splits.test.size else splits.val
    metrics.fusion_weights = mean_fusion_weights(mp, bundle, x, eval_ids)
    return metrics


@dataclass
class SeedReport:
    """evaluate() aggregated over seeds; std is sample stdev, absent for one seed."""

    seeds: list
    runs: list
    accuracies: list
    mean_accuracy: float
    std_accuracy: float | None
    fusion_weights: dict | None
    wall_seconds: float = 0.0

    @classmethod
    def from_runs(cls, seeds, runs, wall_seconds: float = 0.0) -> "SeedReport":
        accs = [m.test_acc for m in runs]
        std = float(np.std(accs, ddof=1)) if len(accs) > 1 else None
        weights = None
        if runs and runs[0].fusion_weights is not None:
            keys = runs[0].fusion_weights.keys()
            weights = {k: float(np.mean([m.fusion_weights[k] for m in runs])) for k in keys}
        return cls(seeds=list(seeds), runs=list(runs), accuracies=accs,
                   mean_accuracy=float(np.mean(accs)), std_accuracy=std,
                   fusion_weights=weights, wall_seconds=wall_seconds)


def run_seeds(model_cfg: ModelConfig, bundle: TokenBundle, x: np.ndarray, y: np.ndarray,
              splits: SplitSet, cfg: TrainConfig, seeds,
              keep_params: list | None = None) -> SeedReport:
    """Fresh init + train + evaluate per seed; optionally collects trained params."""
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("run_seeds needs at least one seed")
    n_classes = int(y.max()) + 1
    runs = []
    started = time.perf_counter()
    for s in seeds:
        mp = init_params(model_cfg, bundle.feature_dim, n_classes,
                         sequences=cfg.sequences, fusion_mode=cfg.fusion_mode, seed=s)
        m = train(mp, bundle, x, y, splits, replace(cfg, seed=s))
        runs.append(m)
        if keep_params is not None:
            keep_params.append(mp)
    return SeedReport.from_runs(seeds, runs, time.perf_counter() - started)


def ablate(model_cfg: ModelConfig, bundle: TokenBundle, x: np.ndarray, y: np.ndarray,
           splits: SplitSet, cfg: TrainConfig, seeds,
           sequences: tuple[str, ...] = SEQ_TYPES,
           fusion_modes: tuple[str, ...] = ()) -> dict[str, SeedReport]:
    """Full model plus one run per single sequence (and optional fusion-mode variants)."""
    if not sequences:
        raise ValueError("ablate needs at least one sequence")
    results: dict[str, SeedReport] = {}
    results["full"] = run_seeds(model_cfg, bundle, x, y, splits, cfg, seeds)
    for seq in sequences:
        results[f"only_{seq}"] = run_seeds(
            model_cfg, bundle, x, y, splits, replace(cfg, sequences=(seq,)), seeds)
    for mode in fusion_modes:
        results[f"fusion_{mode}"] = run_seeds(
            model_cfg, bundle, x, y, splits, replace(cfg, fusion_mode=mode), seeds)
    return results


def sweep(param: str, values, g: Graph, x: np.ndarray, y: np.ndarray, splits: SplitSet,
          node2par_cfg: Node2ParConfig, model_cfg: ModelConfig, cfg: TrainConfig,
          seeds, cache_dir=None) -> list[dict]:
    """Regenerate token bundles per value of `param` (hops or topk) and train each."""
    if param not in ("hops", "topk"):
        raise ValueError(f"sweep param must be 'hops' or 'topk', got {param!r}")
    if not values:
        raise ValueError("sweep needs at least one value")
    out = []
    for value in values:
        tok_cfg = replace(node2par_cfg, **{param: int(value)})
        bundle = _cached_bundle(g, x, tok_cfg, cache_dir)
        report = run_seeds(model_cfg, bundle, x, y, splits, cfg, seeds)
        out.append({"param": param, "value": int(value), "report": report})
    return out


def _cached_bundle(g: Graph, x: np.ndarray, tok_cfg: Node2ParConfig, cache_dir) -> TokenBundle:
    if cache_dir is None:
        return generate_bundle(g, x, tok_cfg)
    from pathlib import Path

    from .cache import load_token_cache, save_token_cache

    tag = (f"h{tok_cfg.hops}_k{tok_cfg.topk}_r{tok_cfg.ppr_damping:g}"
           f"_s{tok_cfg.ppr_steps}_n{int(tok_cfg.attr_adj_normalize)}")
    path = Path(cache_dir) / f"tokens_{tag}.n2pt"
    if path.exists():
        return load_token_cache(path, expected_config=tok_cfg,
                                expected_n=g.n, expected_dim=x.shape[1])
    bundle = generate_bundle(g, x, tok_cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_token_cache(bundle, path)
    return bundle
