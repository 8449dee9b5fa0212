"""Command-line entry point.

Heavy imports happen inside the command handlers so NTF_THREADS (and the
NTF_DETERMINISTIC thread cap) can shape the BLAS thread pools before numpy
loads. Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback
from pathlib import Path


def _apply_thread_env():
    threads = os.environ.get("NTF_THREADS")
    if os.environ.get("NTF_DETERMINISTIC") == "1":
        threads = "1"
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ[var] = threads


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise _UsageError(f"expected comma-separated integers, got {text!r}") from None


def _csv_names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tokgt", description="Token-sequence graph transformer for node classification")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    t = sub.add_parser("tokenize", help="generate the four token sequences and cache them")
    t.add_argument("--data", required=True, help="dataset directory")
    t.add_argument("--out", required=True, help="output token cache file")
    t.add_argument("--hops", type=int, required=True, help="max neighborhood range K")
    t.add_argument("--topk", type=int, required=True, help="similar nodes per node-token sequence")
    t.add_argument("--ppr-damping", type=float, default=0.85)
    t.add_argument("--ppr-steps", type=int, default=2)
    t.add_argument("--attr-adj-normalize", action="store_true")
    t.set_defaults(func=cmd_tokenize)

    tr = sub.add_parser("train", help="train and evaluate, emitting report + checkpoint")
    tr.add_argument("--data", required=True)
    tr.add_argument("--tokens", required=True, help="token cache (generated here if absent)")
    tr.add_argument("--config", help="flat JSON run config")
    tr.add_argument("--seed", type=int, help="overrides the config seed")
    tr.add_argument("--seeds", help="comma-separated seeds for a multi-seed run")
    tr.add_argument("--out", required=True, help="output directory")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a saved model on one split")
    ev.add_argument("--data", required=True)
    ev.add_argument("--tokens", required=True)
    ev.add_argument("--model", required=True, help="model directory from train")
    ev.add_argument("--split", default="test", choices=("train", "val", "test"))
    ev.set_defaults(func=cmd_eval)

    ab = sub.add_parser("ablate", help="single-sequence variants vs the full model")
    ab.add_argument("--data", required=True)
    ab.add_argument("--tokens", required=True)
    ab.add_argument("--config", help="flat JSON run config")
    ab.add_argument("--sequences", default="ne_t,ne_a,no_t,no_a",
                    help="comma-separated single-sequence variants to run")
    ab.add_argument("--fusion-modes", default="",
                    help="extra full-model runs with these fusion modes (e.g. mean,concat)")
    ab.add_argument("--seeds", default="0")
    ab.add_argument("--out", required=True)
    ab.set_defaults(func=cmd_ablate)

    sw = sub.add_parser("sweep", help="vary hops or topk, regenerating token bundles")
    sw.add_argument("--data", required=True)
    sw.add_argument("--config", help="flat JSON run config")
    sw.add_argument("--param", required=True, choices=("hops", "topk"))
    sw.add_argument("--values", required=True, help="comma-separated values, e.g. 3,5,7")
    sw.add_argument("--seeds", default="0")
    sw.add_argument("--cache-dir", help="token cache directory (default OUT/token_cache)")
    sw.add_argument("--out", required=True)
    sw.set_defaults(func=cmd_sweep)

    wt = sub.add_parser("weights", help="dump per-sequence mean fusion weights")
    wt.add_argument("--model", required=True)
    wt.add_argument("--data", required=True)
    wt.add_argument("--tokens", required=True)
    wt.add_argument("--split", default="all", choices=("all", "train", "val", "test"))
    wt.add_argument("--out", help="optional directory for weights.json + figure")
    wt.set_defaults(func=cmd_weights)

    sy = sub.add_parser("synth", help="write a synthetic dataset directory")
    sy.add_argument("--kind", required=True, choices=("sbm", "hetero"))
    sy.add_argument("--out", required=True)
    sy.add_argument("--nodes-per-class", type=int, default=200)
    sy.add_argument("--classes", type=int, default=4, help="hetero only; sbm is 2-block")
    sy.add_argument("--p-in", type=float, default=0.05)
    sy.add_argument("--p-out", type=float, default=0.005)
    sy.add_argument("--edge-prob", type=float, default=0.02, help="hetero only")
    sy.add_argument("--feature-dim", type=int, default=8)
    sy.add_argument("--separation", type=float, default=1.0)
    sy.add_argument("--seed", type=int, default=0)
    sy.set_defaults(func=cmd_synth)

    return p


def _load_tokens(path, ds, cfg):
    """Load a cache validated against cfg/dataset, generating it if absent."""
    from .cache import load_token_cache, save_token_cache
    from .tokens import generate_bundle

    path = Path(path)
    if path.exists():
        return load_token_cache(path, expected_config=cfg, expected_n=ds.graph.n,
                                expected_dim=ds.features.shape[1])
    bundle = generate_bundle(ds.graph, ds.features, cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_token_cache(bundle, path)
    return bundle


def _dataset_info(data_dir, ds) -> dict:
    return {
        "dir": str(data_dir),
        "nodes": ds.graph.n,
        "edges": ds.graph.num_edges,
        "feature_dim": int(ds.features.shape[1]),
        "classes": ds.n_classes,
    }


def _emit(doc: dict):
    print(json.dumps(doc, indent=2, sort_keys=True))


def cmd_tokenize(args) -> int:
    from .cache import save_token_cache
    from .data import load_dataset
    from .report import deterministic_mode
    from .tokens import Node2ParConfig, generate_bundle

    ds = load_dataset(args.data)
    cfg = Node2ParConfig(hops=args.hops, topk=args.topk, ppr_damping=args.ppr_damping,
                         ppr_steps=args.ppr_steps, attr_adj_normalize=args.attr_adj_normalize)
    started = time.perf_counter()
    bundle = generate_bundle(ds.graph, ds.features, cfg)
    elapsed = time.perf_counter() - started
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_token_cache(bundle, args.out)
    summary = {"tokens": str(args.out), "nodes": bundle.n, "hops": cfg.hops, "topk": cfg.topk}
    if not deterministic_mode():
        summary["seconds"] = round(elapsed, 3)
    _emit(summary)
    return 0


def _resolve_seeds(args, default_seed: int) -> list[int]:
    if getattr(args, "seeds", None):
        return _csv_ints(args.seeds)
    if getattr(args, "seed", None) is not None:
        return [args.seed]
    return [default_seed]


def _run_config(args):
    from .config import default_run_config, load_run_config

    return load_run_config(args.config) if args.config else default_run_config()


def cmd_train(args) -> int:
    from dataclasses import replace

    from . import figures
    from .data import load_dataset
    from .modelio import save_model
    from .report import make_report, write_json, write_per_seed_csv
    from .training import run_seeds

    run_cfg = _run_config(args)
    seeds = _resolve_seeds(args, run_cfg.train.seed)
    train_cfg = replace(run_cfg.train, seed=seeds[0])
    ds = load_dataset(args.data)
    timings = {}
    started = time.perf_counter()
    bundle = _load_tokens(args.tokens, ds, run_cfg.node2par)
    timings["tokens_s"] = round(time.perf_counter() - started, 3)

    keep = []
    started = time.perf_counter()
    rep = run_seeds(run_cfg.model, bundle, ds.features, ds.labels, ds.splits,
                    train_cfg, seeds, keep_params=keep)
    timings["train_s"] = round(time.perf_counter() - started, 3)

    out = Path(args.out)
    doc = make_report("train", run_cfg.to_flat(), _dataset_info(args.data, ds), rep, timings)
    write_json(doc, out / "report.json")
    write_per_seed_csv(rep, out / "per_seed.csv")
    figures.training_curves(rep, out / "figures" / "training_curves.png")
    if rep.fusion_weights is not None:
        figures.fusion_weight_bars(rep.fusion_weights, out / "figures" / "fusion_weights.png")
    if len(keep) == 1:
        save_model(out / "model", keep[0])
    else:
        for s, mp in zip(seeds, keep):
            save_model(out / "models" / f"seed_{s}", mp)
    _emit({"out": str(out), "mean_accuracy": rep.mean_accuracy,
           "std_accuracy": rep.std_accuracy, "seeds": seeds})
    return 0


def cmd_eval(args) -> int:
    from .data import load_dataset
    from .modelio import load_model
    from .cache import load_token_cache
    from .training import evaluate

    ds = load_dataset(args.data)
    bundle = load_token_cache(args.tokens, expected_n=ds.graph.n,
                              expected_dim=ds.features.shape[1])
    mp = load_model(args.model)
    ids = getattr(ds.splits, args.split)
    acc = evaluate(mp, bundle, ds.features, ds.labels, ids)
    _emit({"split": args.split, "accuracy": acc, "nodes": int(ids.size)})
    return 0


def cmd_ablate(args) -> int:
    from . import figures
    from .data import load_dataset
    from .model import SEQ_TYPES
    from .report import make_report, write_json, write_variant_csv
    from .training import ablate

    run_cfg = _run_config(args)
    sequences = _csv_names(args.sequences)
    bad = [s for s in sequences if s not in SEQ_TYPES]
    if bad:
        raise _UsageError(f"unknown sequence types {bad}; valid: {', '.join(SEQ_TYPES)}")
    fusion_modes = _csv_names(args.fusion_modes)
    seeds = _csv_ints(args.seeds)
    ds = load_dataset(args.data)
    bundle = _load_tokens(args.tokens, ds, run_cfg.node2par)
    started = time.perf_counter()
    results = ablate(run_cfg.model, bundle, ds.features, ds.labels, ds.splits,
                     run_cfg.train, seeds, sequences=sequences, fusion_modes=fusion_modes)
    timings = {"ablate_s": round(time.perf_counter() - started, 3)}
    out = Path(args.out)
    doc = make_report("ablate", run_cfg.to_flat(), _dataset_info(args.data, ds), results, timings)
    write_json(doc, out / "report.json")
    write_variant_csv(results, out / "ablation.csv")
    figures.variant_bars(results, out / "figures" / "ablation.png")
    _emit({name: rep.mean_accuracy for name, rep in results.items()})
    return 0


def cmd_sweep(args) -> int:
    from . import figures
    from .data import load_dataset
    from .report import make_report, write_json, write_sweep_csv
    from .training import sweep

    run_cfg = _run_config(args)
    values = _csv_ints(args.values)
    seeds = _csv_ints(args.seeds)
    ds = load_dataset(args.data)
    out = Path(args.out)
    cache_dir = Path(args.cache_dir) if args.cache_dir else out / "token_cache"
    started = time.perf_counter()
    records = sweep(args.param, values, ds.graph, ds.features, ds.labels, ds.splits,
                    run_cfg.node2par, run_cfg.model, run_cfg.train, seeds, cache_dir=cache_dir)
    timings = {"sweep_s": round(time.perf_counter() - started, 3)}
    doc = make_report("sweep", run_cfg.to_flat(), _dataset_info(args.data, ds), records, timings)
    write_json(doc, out / "report.json")
    write_sweep_csv(records, out / "sweep.csv")
    figures.sweep_curve(records, out / "figures" / "sweep.png")
    _emit({str(rec["value"]): rec["report"].mean_accuracy for rec in records})
    return 0


def cmd_weights(args) -> int:
    import numpy as np

    from . import figures
    from .cache import load_token_cache
    from .data import load_dataset
    from .modelio import load_model
    from .report import write_json
    from .training import mean_fusion_weights

    ds = load_dataset(args.data)
    bundle = load_token_cache(args.tokens, expected_n=ds.graph.n,
                              expected_dim=ds.features.shape[1])
    mp = load_model(args.model)
    ids = np.arange(ds.graph.n) if args.split == "all" else getattr(ds.splits, args.split)
    weights = mean_fusion_weights(mp, bundle, ds.features, ids)
    doc = {"split": args.split, "nodes": int(ids.size), "fusion_weights": weights,
           "sequences": list(mp.sequences)}
    if args.out:
        out = Path(args.out)
        write_json(doc, out / "weights.json")
        if weights is not None:
            figures.fusion_weight_bars(weights, out / "figures" / "fusion_weights.png")
    _emit(doc)
    return 0


def cmd_synth(args) -> int:
    from .data import save_dataset
    from .graph import edge_homophily
    from .synth import generate_feature_label_graph, generate_sbm, stratified_splits

    if args.kind == "sbm":
        g, x, y = generate_sbm(args.nodes_per_class, args.p_in, args.p_out,
                               args.feature_dim, args.separation, args.seed)
    else:
        g, x, y = generate_feature_label_graph(args.nodes_per_class, args.classes,
                                               args.edge_prob, args.feature_dim,
                                               args.separation, args.seed)
    splits = stratified_splits(y, seed=args.seed)
    save_dataset(args.out, g, x, y, splits)
    _emit({
        "out": str(args.out),
        "kind": args.kind,
        "nodes": g.n,
        "edges": g.num_edges,
        "homophily": round(edge_homophily(g, y), 4) if g.num_edges else None,
    })
    return 0


def main(argv=None) -> int:
    _apply_thread_env()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"tokgt: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args) or 0
    except _UsageError as exc:
        print(f"tokgt: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, FloatingPointError) as exc:
        print(f"tokgt: error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
