"""On-disk dataset layout: graph.edges, features.bin, labels.txt, splits.json."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, SplitSet, build_graph, validate_features, validate_labels

FEATURE_MAGIC = b"NTFX"
_FEATURE_HEADER = struct.Struct("<4sQI")  # magic, n, d

EDGES_FILE = "graph.edges"
FEATURES_FILE = "features.bin"
LABELS_FILE = "labels.txt"
SPLITS_FILE = "splits.json"


@dataclass(frozen=True)
class Dataset:
    graph: Graph
    features: np.ndarray  # (n, d) float32
    labels: np.ndarray    # (n,) int64
    splits: SplitSet
    n_classes: int


def save_features(path, x: np.ndarray) -> None:
    x = np.ascontiguousarray(x, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_FEATURE_HEADER.pack(FEATURE_MAGIC, x.shape[0], x.shape[1]))
        fh.write(x.tobytes())


def load_features(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _FEATURE_HEADER.size or raw[:4] != FEATURE_MAGIC:
        raise ValueError(f"{path}: not a feature file (bad magic)")
    _, n, d = _FEATURE_HEADER.unpack_from(raw)
    expected = _FEATURE_HEADER.size + n * d * 4
    if len(raw) != expected:
        raise ValueError(f"{path}: feature file size mismatch (header says n={n}, d={d})")
    return np.frombuffer(raw, dtype="<f4", count=n * d, offset=_FEATURE_HEADER.size).reshape(n, d).copy()


def save_edges(path, g: Graph) -> None:
    rows = np.repeat(np.arange(g.n), np.diff(g.indptr))
    keep = rows < g.indices
    with open(path, "w") as fh:
        for u, v in zip(rows[keep], g.indices[keep]):
            fh.write(f"{u} {v}\n")


def load_edges(path) -> np.ndarray:
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: malformed edge line {line.rstrip()!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed edge line {line.rstrip()!r}") from None
    return np.asarray(edges, dtype=np.int64).reshape(-1, 2)


def save_labels(path, y: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in y)


def load_labels(path) -> np.ndarray:
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                labels.append(int(s))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed label {s!r}") from None
    return np.asarray(labels, dtype=np.int64)


def save_splits(path, splits: SplitSet) -> None:
    doc = {"train": splits.train.tolist(), "val": splits.val.tolist(), "test": splits.test.tolist()}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_splits(path) -> SplitSet:
    doc = json.loads(Path(path).read_text())
    missing = {"train", "val", "test"} - set(doc)
    if missing:
        raise ValueError(f"{path}: splits file missing keys {sorted(missing)}")
    return SplitSet(
        train=np.asarray(doc["train"], dtype=np.int64),
        val=np.asarray(doc["val"], dtype=np.int64),
        test=np.asarray(doc["test"], dtype=np.int64),
    )


def load_dataset(directory) -> Dataset:
    """Load and cross-validate the four dataset files.

    The feature header fixes n; the graph, labels, and splits must agree
    with it. Labels must be dense in 0..c-1.
    """
    directory = Path(directory)
    for name in (EDGES_FILE, FEATURES_FILE, LABELS_FILE, SPLITS_FILE):
        if not (directory / name).exists():
            raise ValueError(f"missing dataset file: {directory / name}")
    x = load_features(directory / FEATURES_FILE)
    n = x.shape[0]
    edges = load_edges(directory / EDGES_FILE)
    if edges.size and edges.max() >= n:
        raise ValueError(
            f"size mismatch: features n={n}, graph references node {int(edges.max())}")
    graph = build_graph(edges, n)
    y = load_labels(directory / LABELS_FILE)
    if y.shape[0] != n:
        raise ValueError(f"size mismatch: labels n={y.shape[0]}, features n={n}")
    n_classes = validate_labels(y, n)
    validate_features(x, n)
    splits = load_splits(directory / SPLITS_FILE)
    splits.validate(n)
    return Dataset(graph=graph, features=x, labels=y, splits=splits, n_classes=n_classes)


def save_dataset(directory, g: Graph, x: np.ndarray, y: np.ndarray, splits: SplitSet) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_edges(directory / EDGES_FILE, g)
    save_features(directory / FEATURES_FILE, x)
    save_labels(directory / LABELS_FILE, y)
    save_splits(directory / SPLITS_FILE, splits)
