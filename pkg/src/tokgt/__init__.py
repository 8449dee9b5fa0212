"""Token-sequence graph transformer for node classification.

Kept import-light so the CLI can shape BLAS thread pools before numpy loads;
the public names below resolve lazily.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "Graph": "graph",
    "SplitSet": "graph",
    "build_graph": "graph",
    "normalized_adjacency": "graph",
    "spmm": "graph",
    "edge_homophily": "graph",
    "generate_sbm": "synth",
    "generate_feature_label_graph": "synth",
    "stratified_splits": "synth",
    "Node2ParConfig": "tokens",
    "TokenBundle": "tokens",
    "generate_bundle": "tokens",
    "top_k_select": "tokens",
    "Tensor": "autodiff",
    "Parameter": "autodiff",
    "Tape": "autodiff",
    "finite_difference_check": "gradcheck",
    "ModelConfig": "model",
    "ModelParams": "model",
    "init_params": "model",
    "forward": "model",
    "SEQ_TYPES": "model",
    "TrainConfig": "training",
    "train": "training",
    "evaluate": "training",
    "run_seeds": "training",
    "ablate": "training",
    "sweep": "training",
    "adamw_step": "training",
    "AdamWState": "training",
    "load_dataset": "data",
    "save_dataset": "data",
    "save_token_cache": "cache",
    "load_token_cache": "cache",
    "RunConfig": "config",
    "load_run_config": "config",
    "save_model": "modelio",
    "load_model": "modelio",
}


def __getattr__(name):
    if name in _EXPORTS:
        import importlib

        module = importlib.import_module(f".{_EXPORTS[name]}", __name__)
        return getattr(module, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(_EXPORTS) + ["__version__"])
