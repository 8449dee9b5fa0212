"""Dense tensors (rank <= 3) with tape-based reverse-mode differentiation.

Ops record a backward closure onto an explicit Tape as they execute, so the
tape is already in topological order and backward is a single reverse pass.
Passing tape=None runs forward-only (inference). Every op validates that its
output is finite; a NaN or Inf raises immediately instead of polluting a run.
"""

from __future__ import annotations

import numpy as np

DTYPES = {"single": np.float32, "double": np.float64}


class Tensor:
    """Value node: a contiguous float array plus a gradient slot."""

    __slots__ = ("data", "grad")

    def __init__(self, data, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        if arr.ndim > 3:
            raise ValueError(f"tensors are limited to rank 3, got shape {arr.shape}")
        self.data = arr
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


class Parameter(Tensor):
    """Learnable tensor with a persistent gradient accumulator and a stable name."""

    __slots__ = ("name",)

    def __init__(self, data, name: str, dtype=None):
        super().__init__(data, dtype=dtype)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape}, dtype={self.data.dtype})"


class Tape:
    """Ordered record of executed ops; backward replays it once, in reverse."""

    __slots__ = ("_records",)

    def __init__(self):
        self._records = []

    def record(self, fn):
        self._records.append(fn)

    def __len__(self):
        return len(self._records)

    def backward(self, loss: Tensor):
        if loss.data.shape != ():
            raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        loss.grad = np.ones((), dtype=loss.data.dtype)
        for fn in reversed(self._records):
            fn()


def dropout_generator(seed: int, step: int, site: int) -> np.random.Generator:
    """Counter-based mask source: same (seed, step, site) always yields the same mask."""
    key = np.random.SeedSequence((int(seed), 1, int(step), int(site)))
    return np.random.Generator(np.random.Philox(key))


def _finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite values in output of {op}")
    return arr


def _accum(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype)
    else:
        t.grad += g


def _reduce_to(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _swap(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def matmul(a: Tensor, b: Tensor, tape: Tape | None = None,
           transpose_a: bool = False, transpose_b: bool = False) -> Tensor:
    """a @ b with optional transposition of either operand's last two axes.

    Supports 2D@2D, batched 3D@3D, and 3D@2D (shared right operand).
    """
    lhs = _swap(a.data) if transpose_a else a.data
    rhs = _swap(b.data) if transpose_b else b.data
    if lhs.ndim < 2 or rhs.ndim < 2 or lhs.shape[-1] != rhs.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {lhs.shape} @ {rhs.shape}")
    if lhs.ndim == 3 and rhs.ndim == 3 and lhs.shape[0] != rhs.shape[0]:
        raise ValueError(f"matmul batch mismatch: {lhs.shape} @ {rhs.shape}")
    out = Tensor(_finite(lhs @ rhs, "matmul"))

    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            ga = _reduce_to(g @ _swap(rhs), lhs.shape)
            gb = _reduce_to(_swap(lhs) @ g, rhs.shape)
            _accum(a, _swap(ga) if transpose_a else ga)
            _accum(b, _swap(gb) if transpose_b else gb)
        tape.record(bwd)
    return out


def add(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    """Elementwise add; a 1D `b` broadcasts over leading axes (bias add)."""
    if a.shape != b.shape and not (b.data.ndim == 1 and a.shape[-1] == b.shape[0]):
        raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")
    out = Tensor(_finite(a.data + b.data, "add"))
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            _accum(a, g)
            _accum(b, _reduce_to(g, b.shape))
        tape.record(bwd)
    return out


def scalar_mul(a: Tensor, c: float, tape: Tape | None = None) -> Tensor:
    c = float(c)
    out = Tensor(_finite(a.data * c, "scalar_mul"))
    if tape is not None:
        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * c)
        tape.record(bwd)
    return out


def mul(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    """Elementwise product; one operand may have a size-1 trailing axis."""
    ok = a.shape == b.shape \
        or (a.data.ndim == b.data.ndim and a.shape[:-1] == b.shape[:-1]
            and 1 in (a.shape[-1], b.shape[-1]))
    if not ok:
        raise ValueError(f"mul shape mismatch: {a.shape} * {b.shape}")
    out = Tensor(_finite(a.data * b.data, "mul"))
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            _accum(a, _reduce_to(g * b.data, a.shape))
            _accum(b, _reduce_to(g * a.data, b.shape))
        tape.record(bwd)
    return out


def softmax(a: Tensor, tape: Tape | None = None) -> Tensor:
    """Row-wise softmax over the last axis, max-subtracted for stability."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(_finite(y, "softmax"))
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            _accum(a, y * (g - (g * y).sum(axis=-1, keepdims=True)))
        tape.record(bwd)
    return out


def relu(a: Tensor, tape: Tape | None = None) -> Tensor:
    out = Tensor(np.maximum(a.data, 0))
    if tape is not None:
        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * (a.data > 0))
        tape.record(bwd)
    return out


def tanh(a: Tensor, tape: Tape | None = None) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y)
    if tape is not None:
        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * (1.0 - y * y))
        tape.record(bwd)
    return out


def dropout(a: Tensor, p: float, tape: Tape | None = None, *,
            train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    """Train mode zeroes entries with probability p and rescales by 1/(1-p).

    Eval mode (train=False) is the identity and records nothing.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return a
    if rng is None:
        raise ValueError("train-mode dropout needs an explicit generator")
    mask = (rng.random(a.shape) >= p).astype(a.dtype) / np.asarray(1.0 - p, dtype=a.dtype)
    out = Tensor(a.data * mask)
    if tape is not None:
        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * mask)
        tape.record(bwd)
    return out


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, tape: Tape | None = None,
               eps: float = 1e-5) -> Tensor:
    """Per-row (last axis) normalization with learned scale and shift."""
    d = a.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ValueError(f"layer_norm scale/shift must be ({d},)")
    mu = a.data.mean(axis=-1, keepdims=True)
    var = ((a.data - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv
    out = Tensor(_finite(xhat * gain.data + bias.data, "layer_norm"))
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            _accum(gain, _reduce_to(g * xhat, gain.shape))
            _accum(bias, _reduce_to(g, bias.shape))
            dxhat = g * gain.data
            da = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
            _accum(a, da)
        tape.record(bwd)
    return out


def gather_rows(a: Tensor, idx: np.ndarray, tape: Tape | None = None) -> Tensor:
    """Select rows of a 2D tensor; idx may be 1D or 2D (output gains its shape)."""
    if a.data.ndim != 2:
        raise ValueError(f"gather_rows expects a 2D tensor, got shape {a.shape}")
    idx = np.asarray(idx)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ValueError(f"gather index out of range for {a.shape[0]} rows")
    out = Tensor(a.data[idx])
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            acc = np.zeros_like(a.data)
            np.add.at(acc, idx.ravel(), g.reshape(-1, a.shape[-1]))
            _accum(a, acc)
        tape.record(bwd)
    return out


def concat(parts: list[Tensor], tape: Tape | None = None) -> Tensor:
    """Concatenate along the last axis."""
    if not parts:
        raise ValueError("concat of zero tensors")
    lead = parts[0].shape[:-1]
    if any(p.shape[:-1] != lead for p in parts):
        raise ValueError("concat operands differ in leading shape")
    out = Tensor(np.concatenate([p.data for p in parts], axis=-1))
    if tape is not None:
        offsets = np.cumsum([0] + [p.shape[-1] for p in parts])

        def bwd():
            g = out.grad
            if g is None:
                return
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                _accum(p, g[..., lo:hi])
        tape.record(bwd)
    return out


def slice_last(a: Tensor, start: int, stop: int, tape: Tape | None = None) -> Tensor:
    """Contiguous slice along the last axis (inverse of concat)."""
    if not (0 <= start < stop <= a.shape[-1]):
        raise ValueError(f"bad slice [{start}:{stop}] of last dim {a.shape[-1]}")
    out = Tensor(a.data[..., start:stop].copy())
    if tape is not None:
        def bwd():
            if out.grad is None:
                return
            acc = np.zeros_like(a.data)
            acc[..., start:stop] = out.grad
            _accum(a, acc)
        tape.record(bwd)
    return out


def take_first_row(a: Tensor, tape: Tape | None = None) -> Tensor:
    """First row along the sequence axis: (B, L, d) -> (B, d) or (L, d) -> (d,)."""
    if a.data.ndim < 2:
        raise ValueError(f"take_first_row needs rank >= 2, got shape {a.shape}")
    out = Tensor(a.data[..., 0, :].copy())
    if tape is not None:
        def bwd():
            if out.grad is None:
                return
            acc = np.zeros_like(a.data)
            acc[..., 0, :] = out.grad
            _accum(a, acc)
        tape.record(bwd)
    return out


def sum_all(a: Tensor, tape: Tape | None = None) -> Tensor:
    out = Tensor(np.asarray(a.data.sum(), dtype=a.dtype))
    if tape is not None:
        def bwd():
            if out.grad is not None:
                _accum(a, np.broadcast_to(out.grad, a.shape).astype(a.dtype))
        tape.record(bwd)
    return out


def cross_entropy_mean(logits: Tensor, labels: np.ndarray, tape: Tape | None = None) -> Tensor:
    """Mean cross-entropy of (B, c) logits against integer labels."""
    z = logits.data
    if z.ndim != 2:
        raise ValueError(f"cross_entropy_mean expects (B, c) logits, got {z.shape}")
    labels = np.asarray(labels)
    if labels.shape != (z.shape[0],):
        raise ValueError(f"labels must be ({z.shape[0]},), got {labels.shape}")
    m = z.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(z - m).sum(axis=1, keepdims=True))
    rows = np.arange(z.shape[0])
    nll = lse[:, 0] - z[rows, labels]
    out = Tensor(np.asarray(nll.mean(), dtype=z.dtype))
    _finite(out.data, "cross_entropy_mean")
    if tape is not None:
        def bwd():
            g = out.grad
            if g is None:
                return
            p = np.exp(z - lse)
            p[rows, labels] -= 1.0
            _accum(logits, p * (g / z.shape[0]))
        tape.record(bwd)
    return out


ACTIVATIONS = {"relu": relu, "tanh": tanh}
