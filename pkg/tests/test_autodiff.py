import numpy as np
import pytest

from motifreg import autodiff as ad
from motifreg.optim import (
    Adam,
    adam_step,
    check_gradient,
    finite_difference_grad,
    run_gradient_checks,
)


def test_row_softmax_uniform_on_constant_rows():
    out = ad.row_softmax(ad.Tensor([[0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(out.data, [[1 / 3, 1 / 3, 1 / 3]])


def test_row_softmax_rows_sum_to_one_float64():
    with ad.use_dtype(np.float64):
        x = ad.Tensor(np.random.default_rng(0).standard_normal((50, 9)) * 10)
        s = ad.row_softmax(x).data.sum(axis=1)
    np.testing.assert_allclose(s, 1.0, atol=1e-9)


def test_sigmoid_value_and_derivative_at_zero():
    x = ad.parameter(np.zeros((1, 1)))
    y = ad.reduce_sum(ad.sigmoid(x))
    assert y.item() == pytest.approx(0.5)
    ad.backward(y)
    assert x.grad[0, 0] == pytest.approx(0.25)


def test_matmul_identity():
    a = np.random.default_rng(1).standard_normal((4, 4))
    out = ad.matmul(ad.Tensor(a), ad.Tensor(np.eye(4)))
    np.testing.assert_allclose(out.data, a.astype(np.float32), rtol=1e-6)


def test_grad_of_sum_is_ones():
    x = ad.parameter(np.random.default_rng(2).standard_normal((3, 5)))
    ad.backward(ad.reduce_sum(x))
    np.testing.assert_array_equal(x.grad, np.ones((3, 5), dtype=np.float32))


def test_grad_of_half_square_norm_is_x():
    with ad.use_dtype(np.float64):
        x0 = np.random.default_rng(3).standard_normal(7)
        x = ad.parameter(x0)
        loss = ad.scale(ad.reduce_sum(ad.hadamard(x, x)), 0.5)
        ad.backward(loss)
        np.testing.assert_allclose(x.grad, x0, rtol=1e-12)


def test_three_layer_network_matches_finite_differences():
    rng = np.random.default_rng(4)
    W1, W2, W3 = rng.standard_normal((4, 6)), rng.standard_normal((6, 5)), rng.standard_normal((5, 1))

    def build(x):
        h = ad.tanh(ad.matmul(x, ad.Tensor(W1)))
        h = ad.sigmoid(ad.matmul(h, ad.Tensor(W2)))
        return ad.reduce_sum(ad.matmul(h, ad.Tensor(W3)))

    err, _, _ = check_gradient(build, rng.standard_normal((3, 4)))
    assert err <= 1.0


def test_backward_requires_scalar():
    x = ad.parameter(np.ones((2, 2)))
    with pytest.raises(ad.NumericError):
        ad.backward(ad.tanh(x))


def test_backward_twice_raises():
    x = ad.parameter(np.ones(3))
    loss = ad.reduce_sum(ad.tanh(x))
    ad.backward(loss)
    with pytest.raises(ad.TapeStateError):
        ad.backward(loss)


def test_untracked_inputs_receive_no_grad():
    x = ad.parameter(np.ones(3))
    c = ad.Tensor(np.ones(3))
    grads = ad.backward(ad.reduce_sum(ad.hadamard(x, c)))
    assert x in grads and c not in grads
    assert c.grad is None


def test_nonfinite_output_raises():
    x = ad.Tensor(np.array([0.0]))
    with pytest.raises(ad.NumericError):
        ad.log(x)


def test_shape_mismatch_names_op():
    with pytest.raises(ad.NumericError, match="hadamard"):
        ad.hadamard(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((3, 2))))
    with pytest.raises(ad.NumericError, match="matmul"):
        ad.matmul(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((2, 3))))


def test_dropout_eval_is_identity_train_preserves_mean():
    x = ad.Tensor(np.ones((2000, 4)))
    out = ad.dropout(x, 0.4, train_mode=False, rng=None)
    assert out is x
    rng = np.random.default_rng(5)
    out = ad.dropout(x, 0.4, train_mode=True, rng=rng)
    assert out.data.mean() == pytest.approx(1.0, abs=0.02)
    kept = out.data != 0
    np.testing.assert_allclose(out.data[kept], 1.0 / 0.6, rtol=1e-6)


def test_deterministic_given_seed():
    def run():
        rng = np.random.default_rng(77)
        x = ad.Tensor(np.random.default_rng(1).standard_normal((8, 8)))
        return ad.dropout(ad.tanh(x), 0.3, True, rng).data

    np.testing.assert_array_equal(run(), run())


def test_segment_ops_basic():
    x = ad.Tensor(np.array([1.0, 2.0, 3.0, 4.0]))
    seg = np.array([0, 0, 1, 1])
    s = ad.segment_sum(x, seg, 2)
    np.testing.assert_allclose(s.data, [3.0, 7.0])
    sm = ad.segment_softmax(ad.Tensor(np.zeros(4)), seg, 2)
    np.testing.assert_allclose(sm.data, [0.5, 0.5, 0.5, 0.5])


# ------------------------------------------------------------------- optimizer

def test_adam_zero_gradient_keeps_params():
    p = np.array([1.0, -2.0])
    out, m, v = adam_step(p, np.zeros(2), np.zeros(2), np.zeros(2), t=1, lr=0.1)
    np.testing.assert_array_equal(out, p)


def test_adam_first_step_magnitude_near_lr():
    p = np.zeros(3)
    g = np.array([0.3, -2.0, 10.0])
    out, _, _ = adam_step(p, g, np.zeros(3), np.zeros(3), t=1, lr=0.05)
    np.testing.assert_allclose(np.abs(out), 0.05, rtol=1e-6)


def test_adam_descends_quadratic():
    x = ad.parameter(np.array([1.0]))
    opt = Adam({"x": x}, lr=0.1)
    for _ in range(100):
        loss = ad.scale(ad.reduce_sum(ad.hadamard(x, x)), 1.0)
        ad.backward(loss)
        opt.step()
    assert abs(float(x.data[0])) < 0.05


def test_adam_steps_only_params_with_grads():
    a = ad.parameter(np.array([1.0]))
    b = ad.parameter(np.array([1.0]))
    opt = Adam({"a": a, "b": b}, lr=0.5)
    ad.backward(ad.reduce_sum(ad.hadamard(a, a)))
    opt.step()
    assert float(a.data[0]) != 1.0
    assert float(b.data[0]) == 1.0
    assert opt.t["a"] == 1 and opt.t["b"] == 0


# ------------------------------------------------------------- gradient checks

def test_finite_difference_on_quadratic():
    g = finite_difference_grad(lambda x: float((x**2).sum()), np.array([1.0, -3.0]))
    np.testing.assert_allclose(g, [2.0, -6.0], atol=1e-6)


def test_every_op_passes_gradcheck_smoke():
    results = run_gradient_checks(n_configs=3, seed=1, model_cases=False)
    bad = [(n, e) for n, e in results if e > 1.0]
    assert not bad, f"gradcheck failures: {bad}"
