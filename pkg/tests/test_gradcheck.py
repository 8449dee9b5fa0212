import numpy as np
import pytest

from tokgt import autodiff as ad
from tokgt.gradcheck import finite_difference_check


def test_quadratic_at_three():
    x = ad.Parameter(np.array([3.0]), "x")

    def f():
        tape = ad.Tape()
        return ad.sum_all(ad.mul(x, x, tape), tape), tape

    err = finite_difference_check(f, [x])
    assert err < 1e-9
    # and the analytic derivative really is 6
    loss, tape = f()
    x.zero_grad()
    tape.backward(loss)
    assert x.grad[0] == pytest.approx(6.0, abs=1e-12)


def test_tiny_mlp_cross_entropy():
    rng = np.random.default_rng(0)
    w1 = ad.Parameter(rng.standard_normal((5, 8)) * 0.3, "w1")
    b1 = ad.Parameter(np.zeros(8), "b1")
    w2 = ad.Parameter(rng.standard_normal((8, 3)) * 0.3, "w2")
    b2 = ad.Parameter(np.zeros(3), "b2")
    x = ad.Tensor(rng.standard_normal((6, 5)))
    y = np.array([0, 1, 2, 0, 1, 2])

    def f():
        tape = ad.Tape()
        h = ad.relu(ad.add(ad.matmul(x, w1, tape), b1, tape), tape)
        logits = ad.add(ad.matmul(h, w2, tape), b2, tape)
        return ad.cross_entropy_mean(logits, y, tape), tape

    assert finite_difference_check(f, [w1, b1, w2, b2], eps=1e-5) < 1e-6


def test_detects_nondeterministic_function():
    import itertools

    x = ad.Parameter(np.array([1.0]), "x")
    counter = itertools.count()

    def f():
        tape = ad.Tape()
        return ad.scalar_mul(ad.sum_all(x, tape), 1.0 + next(counter) * 0.1, tape), tape

    with pytest.raises(ValueError, match="not deterministic"):
        finite_difference_check(f, [x])
