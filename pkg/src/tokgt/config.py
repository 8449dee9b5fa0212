"""Flat experiment configuration: one key-value document drives a whole run."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

from .model import ModelConfig
from .tokens import Node2ParConfig
from .training import TrainConfig

_NODE2PAR_KEYS = ("hops", "topk", "ppr_damping", "ppr_steps", "attr_adj_normalize")
_NODE2PAR_DEFAULTS = {"hops": 3, "topk": 5}


def _field_names(cls) -> tuple[str, ...]:
    return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class RunConfig:
    """Validated bundle of token, model, and training settings."""

    node2par: Node2ParConfig
    model: ModelConfig
    train: TrainConfig

    @staticmethod
    def from_flat(doc: dict) -> "RunConfig":
        """Build from a flat dict; unknown keys are an error, defaults fill the rest."""
        doc = dict(doc)
        known = set(_NODE2PAR_KEYS) | set(_field_names(ModelConfig)) | set(_field_names(TrainConfig))
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        if "sequences" in doc and isinstance(doc["sequences"], str):
            doc["sequences"] = tuple(s.strip() for s in doc["sequences"].split(",") if s.strip())
        if "sequences" in doc:
            doc["sequences"] = tuple(doc["sequences"])

        def pick(names, defaults=None):
            out = dict(defaults or {})
            out.update({k: doc[k] for k in names if k in doc})
            return out

        return RunConfig(
            node2par=Node2ParConfig(**pick(_NODE2PAR_KEYS, _NODE2PAR_DEFAULTS)),
            model=ModelConfig(**pick(_field_names(ModelConfig))),
            train=TrainConfig(**pick(_field_names(TrainConfig))),
        )

    def to_flat(self) -> dict:
        """Every setting with defaults resolved; enough to reproduce the run."""
        out = {}
        for k in _NODE2PAR_KEYS:
            out[k] = getattr(self.node2par, k)
        for k in _field_names(ModelConfig):
            out[k] = getattr(self.model, k)
        for k in _field_names(TrainConfig):
            out[k] = getattr(self.train, k)
        out["sequences"] = list(self.train.sequences)
        return out


def load_run_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON config ({exc})") from None
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return RunConfig.from_flat(doc)


def default_run_config() -> RunConfig:
    return RunConfig.from_flat({})
