"""Model directory layout: params.bin checkpoint + flat config.json."""

from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path

from .cache import load_params_into, params_from_model, save_params
from .model import ModelConfig, ModelParams, init_params

PARAMS_FILE = "params.bin"
CONFIG_FILE = "config.json"


def save_model(directory, mp: ModelParams) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = {f.name: getattr(mp.config, f.name) for f in fields(ModelConfig)}
    doc.update({
        "d_in": mp.d_in,
        "n_classes": mp.n_classes,
        "sequences": list(mp.sequences),
        "fusion_mode": mp.fusion_mode,
    })
    (directory / CONFIG_FILE).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    save_params(params_from_model(mp), directory / PARAMS_FILE)


def load_model(directory) -> ModelParams:
    directory = Path(directory)
    cfg_path = directory / CONFIG_FILE
    if not cfg_path.exists():
        raise ValueError(f"missing model config: {cfg_path}")
    doc = json.loads(cfg_path.read_text())
    structural = {"d_in", "n_classes", "sequences", "fusion_mode"}
    missing = (structural | {"hidden_dim"}) - set(doc)
    if missing:
        raise ValueError(f"{cfg_path}: missing keys {sorted(missing)}")
    model_keys = {f.name for f in fields(ModelConfig)}
    cfg = ModelConfig(**{k: v for k, v in doc.items() if k in model_keys})
    mp = init_params(cfg, int(doc["d_in"]), int(doc["n_classes"]),
                     sequences=tuple(doc["sequences"]),
                     fusion_mode=doc["fusion_mode"], seed=0)
    load_params_into(mp, directory / PARAMS_FILE)
    return mp
