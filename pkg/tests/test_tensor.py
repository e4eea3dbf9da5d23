from __future__ import annotations

import numpy as np
import pytest
from gradcheck import check_gradients

import graphloom.tensor as T
from graphloom.errors import TensorShapeError
from graphloom.optim import Adam


def rnd(rng, *shape):
    return T.parameter(rng.uniform(-2, 2, size=shape))


def test_matmul_identity():
    a = T.constant([[1.0, 2.0], [3.0, 4.0]])
    out = T.matmul(a, T.constant(np.eye(2)))
    np.testing.assert_array_equal(out.data, a.data)


def test_softmax_symmetry():
    out = T.softmax(T.constant([0.0, 0.0]))
    np.testing.assert_allclose(out.data, [0.5, 0.5])


def test_concat_shape_arithmetic():
    a, b = T.constant(np.zeros((2, 3))), T.constant(np.ones((2, 5)))
    assert T.concat([a, b]).shape == (2, 8)


def test_concat_rejects_mismatched_leading_dims():
    with pytest.raises(TensorShapeError):
        T.concat([T.constant(np.zeros((2, 3))), T.constant(np.zeros((3, 3)))])


def test_matmul_error_names_both_shapes():
    with pytest.raises(TensorShapeError) as err:
        T.matmul(T.constant(np.zeros((2, 3))), T.constant(np.zeros((2, 3))))
    assert "(2, 3)" in str(err.value)


def test_square_gradient():
    x = T.parameter(3.0)
    with T.trace() as tape:
        loss = T.mul(x, x)
        tape.backward(loss)
    assert x.grad == pytest.approx(6.0)


def test_softmax_sum_is_constant():
    x = T.parameter(np.array([0.3, -1.2, 2.0]))
    with T.trace() as tape:
        loss = T.sum_(T.softmax(x))
        tape.backward(loss)
    np.testing.assert_allclose(x.grad, np.zeros(3), atol=1e-12)


def test_backward_requires_scalar_loss():
    x = T.parameter(np.zeros(3))
    with T.trace() as tape:
        y = T.mul(x, x)
        with pytest.raises(TensorShapeError):
            tape.backward(y)


def test_backward_requires_loss_on_tape():
    x = T.parameter(2.0)
    with T.trace():
        y = T.mul(x, x)
    with T.trace() as other:
        T.mul(x, x)
        with pytest.raises(TensorShapeError):
            other.backward(y)


def test_log_and_division_are_clamped():
    out = T.log(T.constant([0.0, 1.0]))
    assert np.isfinite(out.data).all()
    big = T.exp(T.constant([1000.0]))
    assert np.isfinite(big.data).all()


@pytest.mark.parametrize("seed", range(5))
def test_primitive_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    a = rnd(rng, 3, 4)
    b = rnd(rng, 3, 4)
    w = rnd(rng, 4, 2)
    table = rnd(rng, 6, 3)
    idx = rng.integers(0, 6, size=5)
    cases = [
        lambda: T.sum_(T.mul(T.add(a, b), T.sub(a, b))),
        lambda: T.sum_(T.matmul(a, w)),
        lambda: T.sum_(T.tanh(T.concat([a, b]))),
        lambda: T.sum_(T.sigmoid(T.slice_(a, (slice(None), slice(1, 3))))),
        lambda: T.sum_(T.relu(T.sub(a, b))),
        lambda: T.sum_(T.exp(T.mul(a, T.constant(0.3)))),
        lambda: T.sum_(T.log(T.add(T.mul(a, a), T.constant(0.5)))),
        lambda: T.sum_(T.softmax(T.matmul(a, w))),
        lambda: T.sum_(T.gather(table, idx)),
        lambda: T.sum_(T.mean_(T.mul(a, b), axis=0)),
        lambda: T.sum_(T.sum_(a, axis=1, keepdims=True)),
    ]
    for build in cases:
        check_gradients(build, [a, b, w, table])


@pytest.mark.parametrize("seed", range(3))
def test_broadcast_add_gradient_reduces_over_broadcast_axes(seed):
    rng = np.random.default_rng(seed)
    x = rnd(rng, 5, 4)
    bias = rnd(rng, 4)
    check_gradients(lambda: T.sum_(T.tanh(T.add(x, bias))), [x, bias])
    row = rnd(rng, 5, 1)
    check_gradients(lambda: T.sum_(T.mul(x, row)), [x, row])


def test_three_layer_mlp_gradient_matches_oracle():
    rng = np.random.default_rng(42)
    x = T.constant(rng.uniform(-2, 2, size=(4, 3)))
    w1, b1 = rnd(rng, 3, 8), rnd(rng, 8)
    w2, b2 = rnd(rng, 8, 8), rnd(rng, 8)
    w3, b3 = rnd(rng, 8, 2), rnd(rng, 2)

    def build():
        h1 = T.relu(T.affine(x, w1, b1))
        h2 = T.tanh(T.affine(h1, w2, b2))
        out = T.affine(h2, w3, b3)
        return T.sum_(T.mul(out, out))

    check_gradients(build, [w1, b1, w2, b2, w3, b3])


def test_gather_range_check():
    table = T.parameter(np.zeros((4, 2)))
    with pytest.raises(TensorShapeError):
        T.gather(table, [0, 4])


def test_determinism_same_seed_same_bits():
    def run():
        rng = np.random.default_rng(11)
        x = T.parameter(rng.normal(size=(6, 6)))
        w = T.parameter(rng.normal(size=(6, 6)))
        with T.trace() as tape:
            loss = T.sum_(T.softmax(T.matmul(T.tanh(x), w)))
            tape.backward(loss)
        return loss.data.copy(), x.grad.copy(), w.grad.copy()

    first, second = run(), run()
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)


def test_inference_mode_records_nothing():
    x = T.parameter(np.ones(3))
    out = T.mul(x, x)  # no tape active
    assert out.backward_fn is None and out.parents == ()


def test_adam_first_step_moves_by_learning_rate():
    p = T.parameter(np.array([1.0, 2.0]))
    p.grad = np.array([1.0, 1.0])
    adam = Adam([p], lr=0.001)
    adam.step()
    # bias-corrected ratio is 1 at t=1, so the move is lr/(1+eps) ~ lr
    np.testing.assert_allclose(p.data, [1.0 - 0.001, 2.0 - 0.001], atol=1e-8)


def test_adam_zero_gradient_from_fresh_state_keeps_parameters():
    p = T.parameter(np.array([5.0]))
    p.grad = np.zeros(1)
    adam = Adam([p])
    adam.step()
    np.testing.assert_array_equal(p.data, [5.0])


def test_adam_constant_gradient_moves_monotonically():
    p = T.parameter(np.array([0.0]))
    adam = Adam([p], lr=0.01)
    previous = 0.0
    for _ in range(2):
        p.grad = np.array([2.0])
        adam.step()
        assert p.data[0] < previous
        previous = p.data[0]
