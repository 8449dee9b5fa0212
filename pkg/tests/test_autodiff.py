import numpy as np
import pytest

from tokgt import autodiff as ad
from tokgt.gradcheck import finite_difference_check


def test_softmax_uniform():
    assert np.allclose(ad.softmax(ad.Tensor([0.0, 0.0, 0.0, 0.0])).data, 0.25)


def test_softmax_overflow_guard():
    out = ad.softmax(ad.Tensor([1000.0, 0.0])).data
    assert np.allclose(out, [1.0, 0.0])


def test_softmax_rows_sum_to_one_and_shift_invariant():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((6, 5))
    y = ad.softmax(ad.Tensor(z)).data
    assert np.abs(y.sum(axis=1) - 1.0).max() < 1e-12
    y_shift = ad.softmax(ad.Tensor(z + 3.7)).data
    assert np.abs(y - y_shift).max() < 1e-12
    y32 = ad.softmax(ad.Tensor(z.astype(np.float32))).data
    assert np.abs(y32.sum(axis=1) - 1.0).max() < 1e-6


def test_dropout_eval_identity():
    x = ad.Tensor(np.arange(6.0))
    assert ad.dropout(x, 0.5, train=False) is x


def test_dropout_train_mask_and_scaling():
    rng = ad.dropout_generator(0, 0, 0)
    x = ad.Tensor(np.ones((100, 100)))
    out = ad.dropout(x, 0.25, train=True, rng=rng).data
    kept = out != 0.0
    assert abs(kept.mean() - 0.75) < 0.02
    assert np.allclose(out[kept], 1.0 / 0.75)


def test_dropout_counter_based_reproducibility():
    x = ad.Tensor(np.ones(1000))
    a = ad.dropout(x, 0.5, train=True, rng=ad.dropout_generator(7, 3, 2)).data
    b = ad.dropout(x, 0.5, train=True, rng=ad.dropout_generator(7, 3, 2)).data
    c = ad.dropout(x, 0.5, train=True, rng=ad.dropout_generator(7, 3, 3)).data
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != c.tobytes()


def test_layer_norm_row_statistics():
    rng = np.random.default_rng(1)
    x = ad.Tensor(rng.standard_normal((9, 16)) * 4 + 2)
    out = ad.layer_norm(x, ad.Tensor(np.ones(16)), ad.Tensor(np.zeros(16))).data
    assert np.abs(out.mean(axis=-1)).max() < 1e-5
    assert np.abs(out.var(axis=-1) - 1.0).max() < 1e-4


def test_backward_sum_gives_ones():
    w = ad.Parameter(np.random.default_rng(2).standard_normal((3, 4)), "w")
    tape = ad.Tape()
    loss = ad.sum_all(w, tape)
    tape.backward(loss)
    assert np.array_equal(w.grad, np.ones((3, 4)))


def test_backward_matmul_adjoint():
    rng = np.random.default_rng(3)
    a = ad.Parameter(rng.standard_normal((2, 3)), "a")
    b = ad.Parameter(rng.standard_normal((3, 4)), "b")
    tape = ad.Tape()
    loss = ad.sum_all(ad.matmul(a, b, tape), tape)
    tape.backward(loss)
    assert np.allclose(a.grad, np.ones((2, 4)) @ b.data.T)
    assert np.allclose(b.grad, a.data.T @ np.ones((2, 4)))


def test_unused_parameter_gets_zero_gradient():
    used = ad.Parameter(np.ones(3), "used")
    unused = ad.Parameter(np.ones(3), "unused")
    tape = ad.Tape()
    loss = ad.sum_all(used, tape)
    tape.backward(loss)
    assert np.array_equal(unused.grad, np.zeros(3))


def test_backward_requires_scalar():
    t = ad.Parameter(np.ones(3), "t")
    tape = ad.Tape()
    out = ad.scalar_mul(t, 2.0, tape)
    with pytest.raises(ValueError, match="scalar"):
        tape.backward(out)


def test_non_finite_forward_raises():
    big = ad.Tensor(np.array([1e308]))
    with np.errstate(over="ignore"):
        with pytest.raises(FloatingPointError, match="non-finite"):
            ad.add(big, big)


def test_rank_limit_and_shape_errors():
    with pytest.raises(ValueError, match="rank 3"):
        ad.Tensor(np.zeros((2, 2, 2, 2)))
    with pytest.raises(ValueError, match="matmul"):
        ad.matmul(ad.Tensor(np.zeros((2, 3))), ad.Tensor(np.zeros((2, 3))))
    with pytest.raises(ValueError, match="add"):
        ad.add(ad.Tensor(np.zeros((2, 3))), ad.Tensor(np.zeros((3, 2))))


@pytest.mark.parametrize("op_name", ["matmul", "matmul_t", "add", "add_bias", "scalar_mul",
                                     "mul", "mul_narrow", "softmax", "relu", "tanh",
                                     "layer_norm", "gather", "concat", "slice", "first_row",
                                     "cross_entropy", "dropout"])
def test_primitive_gradients_match_finite_differences(op_name):
    rng = np.random.default_rng(hash(op_name) % 2 ** 31)
    a = ad.Parameter(rng.standard_normal((3, 4)), "a")
    b = ad.Parameter(rng.standard_normal((4, 3)), "b")
    v = ad.Parameter(rng.standard_normal(4), "v")
    g = ad.Parameter(rng.uniform(0.5, 1.5, 4), "g")
    narrow = ad.Parameter(rng.standard_normal((3, 1)), "narrow")
    probe = ad.Tensor(rng.standard_normal((3, 4)))
    labels = np.array([0, 2, 1])

    def build(tape):
        if op_name == "matmul":
            return ad.matmul(a, b, tape)
        if op_name == "matmul_t":
            return ad.matmul(a, a, tape, transpose_b=True)
        if op_name == "add":
            return ad.add(a, ad.scalar_mul(a, 0.5, tape), tape)
        if op_name == "add_bias":
            return ad.add(a, v, tape)
        if op_name == "scalar_mul":
            return ad.scalar_mul(a, -1.7, tape)
        if op_name == "mul":
            return ad.mul(a, probe, tape)
        if op_name == "mul_narrow":
            return ad.mul(a, narrow, tape)
        if op_name == "softmax":
            return ad.mul(ad.softmax(a, tape), probe, tape)
        if op_name == "relu":
            return ad.relu(a, tape)
        if op_name == "tanh":
            return ad.tanh(a, tape)
        if op_name == "layer_norm":
            return ad.layer_norm(a, g, v, tape)
        if op_name == "gather":
            return ad.gather_rows(a, np.array([0, 2, 2, 1]), tape)
        if op_name == "concat":
            return ad.concat([a, ad.scalar_mul(a, 2.0, tape)], tape)
        if op_name == "slice":
            return ad.slice_last(a, 1, 3, tape)
        if op_name == "first_row":
            return ad.take_first_row(a, tape)
        if op_name == "cross_entropy":
            return ad.cross_entropy_mean(a, labels, tape)
        if op_name == "dropout":
            return ad.dropout(a, 0.4, tape, train=True, rng=ad.dropout_generator(1, 2, 3))
        raise AssertionError(op_name)

    params = [a, b, v, g, narrow]

    def f():
        tape = ad.Tape()
        out = build(tape)
        if out.data.shape == ():
            return out, tape
        # fold through a fixed random projection so no row-sum degeneracy hides errors
        w = ad.Tensor(np.linspace(-1, 1, out.data.size).reshape(out.data.shape))
        return ad.sum_all(ad.mul(out, w, tape), tape), tape

    err = finite_difference_check(f, params)
    assert err < 1e-6, f"{op_name}: {err}"


def test_3d_matmul_gradients():
    rng = np.random.default_rng(9)
    q = ad.Parameter(rng.standard_normal((2, 3, 4)), "q")
    w = ad.Parameter(rng.standard_normal((4, 4)), "w")

    def f():
        tape = ad.Tape()
        qk = ad.matmul(q, q, tape, transpose_b=True)        # (2, 3, 3)
        att = ad.softmax(ad.scalar_mul(qk, 0.5, tape), tape)
        out = ad.matmul(att, ad.matmul(q, w, tape), tape)   # (2, 3, 4)
        probe = ad.Tensor(np.linspace(-1, 1, out.data.size).reshape(out.data.shape))
        return ad.sum_all(ad.mul(out, probe, tape), tape), tape

    assert finite_difference_check(f, [q, w]) < 1e-6
