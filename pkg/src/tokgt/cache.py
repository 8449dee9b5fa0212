"""Binary persistence: token caches and parameter checkpoints.

Both formats are little-endian with a magic tag and version. The token cache
carries the generating config in its header and a trailing FNV-1a checksum,
so a stale or truncated cache is rejected instead of silently reused.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .autodiff import Parameter
from .tokens import (NeighborhoodTokens, Node2ParConfig, NodeTokens, TokenBundle,
                     VIEW_ATTRIBUTE, VIEW_TOPOLOGY)

TOKEN_MAGIC = b"N2PT"
TOKEN_VERSION = 1
_TOKEN_HEADER = struct.Struct("<4sIQIIIBdI")  # magic, version, n, K, n_k, d, flags, r, steps

CHECKPOINT_MAGIC = b"NTFW"
CHECKPOINT_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None


def _fnv1a_python(buf: np.ndarray) -> int:
    h = _FNV_OFFSET
    for b in buf.tolist():
        h = ((h ^ b) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


if _njit is not None:
    @_njit(cache=True)
    def _fnv1a_fast(buf):  # pragma: no cover - exercised via fnv1a
        h = np.uint64(_FNV_OFFSET)
        p = np.uint64(_FNV_PRIME)
        for i in range(buf.size):
            h = np.uint64((h ^ np.uint64(buf[i])) * p)
        return h
else:  # pragma: no cover
    _fnv1a_fast = None


def fnv1a(data) -> int:
    """64-bit FNV-1a over a bytes-like object."""
    buf = np.frombuffer(data, dtype=np.uint8)
    if _fnv1a_fast is not None:
        return int(_fnv1a_fast(buf))
    return _fnv1a_python(buf)


def _atomic_write(path, blobs):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        for blob in blobs:
            fh.write(blob)
    os.replace(tmp, path)


def save_token_cache(bundle: TokenBundle, path) -> None:
    """Write a bundle; round-trips bit-exactly (neighborhood slices stored as f32)."""
    cfg = bundle.config
    n, d = bundle.n, bundle.feature_dim
    header = _TOKEN_HEADER.pack(
        TOKEN_MAGIC, TOKEN_VERSION, n, cfg.hops, cfg.topk, d,
        int(cfg.attr_adj_normalize), cfg.ppr_damping, cfg.ppr_steps,
    )
    blocks = [
        np.ascontiguousarray(bundle.ne_t.data, dtype="<f4").tobytes(),
        np.ascontiguousarray(bundle.ne_a.data, dtype="<f4").tobytes(),
        np.ascontiguousarray(bundle.no_t.ids, dtype="<u8").tobytes(),
        np.ascontiguousarray(bundle.no_a.ids, dtype="<u8").tobytes(),
    ]
    checksum = fnv1a(b"".join([header] + blocks))
    _atomic_write(path, [header] + blocks + [struct.pack("<Q", checksum)])


def load_token_cache(path, expected_config: Node2ParConfig | None = None,
                     expected_n: int | None = None,
                     expected_dim: int | None = None) -> TokenBundle:
    """Read and verify a token cache.

    Checksum failure (including truncation) raises before anything is parsed;
    a header that disagrees with the expected config, node count, or feature
    dim raises "config mismatch" so the caller regenerates.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _TOKEN_HEADER.size + 8:
        raise ValueError(f"{path}: token cache corrupt (checksum mismatch)")
    body, stored = raw[:-8], struct.unpack("<Q", raw[-8:])[0]
    if fnv1a(body) != stored:
        raise ValueError(f"{path}: token cache corrupt (checksum mismatch)")
    magic, version, n, hops, topk, d, flags, damping, steps = _TOKEN_HEADER.unpack_from(body)
    if magic != TOKEN_MAGIC:
        raise ValueError(f"{path}: not a token cache file")
    if version != TOKEN_VERSION:
        raise ValueError(f"{path}: token cache version mismatch (have {version}, support {TOKEN_VERSION})")
    cfg = Node2ParConfig(hops=hops, topk=topk, ppr_damping=damping,
                         ppr_steps=steps, attr_adj_normalize=bool(flags & 1))
    if expected_config is not None and cfg != expected_config:
        raise ValueError(f"{path}: token cache config mismatch (cache {cfg}, requested {expected_config})")
    if expected_n is not None and n != expected_n:
        raise ValueError(f"{path}: token cache config mismatch (cache n={n}, dataset n={expected_n})")
    if expected_dim is not None and d != expected_dim:
        raise ValueError(f"{path}: token cache config mismatch (cache d={d}, dataset d={expected_dim})")

    ne_count = n * (hops + 1) * d
    no_count = n * (topk + 1)
    expected_len = _TOKEN_HEADER.size + 2 * ne_count * 4 + 2 * no_count * 8
    if len(body) != expected_len:
        raise ValueError(f"{path}: token cache corrupt (checksum mismatch)")
    off = _TOKEN_HEADER.size

    def block(count, dtype, shape):
        nonlocal off
        arr = np.frombuffer(body, dtype=dtype, count=count, offset=off).reshape(shape)
        off += count * arr.dtype.itemsize
        return arr

    ne_t = block(ne_count, "<f4", (n, hops + 1, d)).copy()
    ne_a = block(ne_count, "<f4", (n, hops + 1, d)).copy()
    no_t = block(no_count, "<u8", (n, topk + 1)).astype(np.int64)
    no_a = block(no_count, "<u8", (n, topk + 1)).astype(np.int64)
    return TokenBundle(
        ne_t=NeighborhoodTokens(view=VIEW_TOPOLOGY, data=ne_t),
        ne_a=NeighborhoodTokens(view=VIEW_ATTRIBUTE, data=ne_a),
        no_t=NodeTokens(view=VIEW_TOPOLOGY, ids=no_t),
        no_a=NodeTokens(view=VIEW_ATTRIBUTE, ids=no_a),
        config=cfg,
    )


def save_params(named_arrays, path) -> None:
    """Checkpoint a list of (name, array) pairs; payloads are stored as f32."""
    blobs = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION)]
    for name, arr in named_arrays:
        encoded = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        blobs.append(struct.pack("<I", len(encoded)))
        blobs.append(encoded)
        blobs.append(struct.pack("<I", arr.ndim))
        blobs.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        blobs.append(arr.tobytes())
    _atomic_write(path, blobs)


def load_params(path) -> dict[str, np.ndarray]:
    """Read a checkpoint back into {name: float32 array}, preserving order."""
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version = struct.unpack_from("<I", raw, 4)[0]
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: checkpoint version mismatch (have {version}, support {CHECKPOINT_VERSION})")
    off = 8
    out: dict[str, np.ndarray] = {}
    while off < len(raw):
        try:
            (name_len,) = struct.unpack_from("<I", raw, off)
            off += 4
            name = raw[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<I", raw, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}Q", raw, off)
            off += 8 * rank
            count = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(raw, dtype="<f4", count=count, offset=off).reshape(dims)
            off += count * 4
        except (struct.error, ValueError) as exc:
            raise ValueError(f"{path}: checkpoint truncated or corrupt") from exc
        out[name] = arr.copy()
    return out


def params_from_model(mp) -> list[tuple[str, np.ndarray]]:
    return [(p.name, p.data) for p in mp.parameters()]


def load_params_into(mp, path) -> None:
    """Overwrite a built model's tensors from a checkpoint; names must match exactly."""
    loaded = load_params(path)
    have = set(loaded)
    want = {p.name for p in mp.parameters()}
    if have != want:
        missing = sorted(want - have)
        extra = sorted(have - want)
        raise ValueError(f"checkpoint does not match model (missing {missing}, unexpected {extra})")
    for p in mp.parameters():
        arr = loaded[p.name]
        if tuple(arr.shape) != tuple(p.data.shape):
            raise ValueError(f"checkpoint shape mismatch for {p.name}: {arr.shape} vs {p.data.shape}")
        p.data[...] = arr.astype(p.data.dtype)
