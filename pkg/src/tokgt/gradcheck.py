"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .autodiff import Parameter


def finite_difference_check(f, params: list[Parameter], eps: float = 1e-5,
                            return_detail: bool = False):
    """Compare analytic gradients of a scalar function against central differences.

    `f` takes no arguments, runs a fresh forward pass over `params`, and
    returns (loss Tensor, tape Tape). It must be deterministic and should run
    in double precision for the comparison to be meaningful. Relative error
    uses max(|analytic|, |numeric|, 1e-8) as the denominator; the maximum
    over all coordinates is returned.
    """
    loss_a, tape = f()
    loss_b, _ = f()
    if loss_a.data.tobytes() != loss_b.data.tobytes():
        raise ValueError("function is not deterministic: two evaluations disagree")
    for p in params:
        p.zero_grad()
    tape.backward(loss_a)
    analytic = {p.name: p.grad.copy() for p in params}

    worst = 0.0
    detail = {}
    for p in params:
        flat = p.data.reshape(-1)
        gflat = analytic[p.name].reshape(-1)
        p_worst = 0.0
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            up = float(f()[0].data)
            flat[j] = orig - eps
            down = float(f()[0].data)
            flat[j] = orig
            numeric = (up - down) / (2.0 * eps)
            a = float(gflat[j])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            p_worst = max(p_worst, rel)
        detail[p.name] = p_worst
        worst = max(worst, p_worst)
    if return_detail:
        return worst, detail
    return worst
