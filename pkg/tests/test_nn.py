import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedalu.losses import batch_objective
from fedalu.nn import Gradients, ModelParams, ShapeError, backward, forward, init_params, sgd_step


def linear(w, b=None):
    w = np.asarray(w, dtype=float)
    b = np.zeros(w.shape[0]) if b is None else np.asarray(b, dtype=float)
    return ModelParams((w,), (b,))


def unflatten(params, flat):
    out_w, out_b, i = [], [], 0
    for w, b in zip(params.weights, params.biases):
        out_w.append(flat[i:i + w.size].reshape(w.shape))
        i += w.size
        out_b.append(flat[i:i + b.size].copy())
        i += b.size
    return ModelParams(tuple(out_w), tuple(out_b))


def test_identity_forward():
    np.testing.assert_array_equal(forward(linear(np.eye(2)), [1.0, 2.0]), [1.0, 2.0])


def test_zero_network_gives_zero_logits():
    params = ModelParams((np.zeros((4, 3)), np.zeros((3, 4))), (np.zeros(4), np.zeros(3)))
    np.testing.assert_array_equal(forward(params, [5.0, -2.0, 7.0]), np.zeros(3))


def test_two_layer_forward_matches_straight_line_evaluation():
    params = init_params([5, 4, 3], seed=11)
    x = np.array([0.3, -1.2, 0.5, 2.0, -0.7])
    w1, w2 = params.weights
    hidden = []
    for i in range(4):
        z = sum(w1[i, j] * x[j] for j in range(5))
        hidden.append(max(z, 0.0))
    expected = [sum(w2[o, i] * hidden[i] for i in range(4)) for o in range(3)]
    np.testing.assert_allclose(forward(params, x), expected, rtol=0, atol=1e-14)


def test_forward_rejects_wrong_input_dim():
    with pytest.raises(ShapeError, match="expected 3, got 2"):
        forward(init_params([3, 2], 0), [1.0, 2.0])


def test_zero_logit_gradient_gives_zero_gradients():
    params = init_params([4, 6, 3], 1)
    g = backward(params, np.ones((2, 4)), np.zeros((2, 3)))
    assert not g.flat().any()


def test_single_linear_layer_gradient_is_outer_product():
    params = init_params([3, 2], 5)
    x = np.array([1.0, -2.0, 0.5])
    gl = np.array([0.25, -1.5])
    g = backward(params, x[None], gl[None])
    np.testing.assert_array_equal(g.weights[0], np.outer(gl, x))
    np.testing.assert_array_equal(g.biases[0], gl)


def test_backward_errors():
    params = init_params([3, 2], 0)
    with pytest.raises(ValueError, match="non-empty"):
        backward(params, np.zeros((0, 3)), np.zeros((0, 2)))
    with pytest.raises(ShapeError):
        backward(params, np.zeros((1, 3)), np.zeros((1, 3)))


def objective_fd_check(dims, seed, n=4, beta=0.7, tau=2.0):
    """Max relative error between backprop and central differences of the full objective."""
    rng = np.random.default_rng(seed)
    params = init_params(dims, seed)
    x = rng.standard_normal((n, dims[0]))
    labels = rng.integers(0, dims[-1], n)
    teachers = rng.standard_normal((n, dims[-1])) * 2
    mask = rng.random(n) < 0.75

    def loss_at(p):
        loss, _ = batch_objective(forward(p, x), labels, teachers, mask, beta, tau)
        return loss.mean()

    _, grad_logits = batch_objective(forward(params, x), labels, teachers, mask, beta, tau)
    analytic = backward(params, x, grad_logits).flat()
    theta = params.flat()
    h = 1e-5
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        numeric[i] = (loss_at(unflatten(params, up)) - loss_at(unflatten(params, down))) / (2 * h)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return np.max(np.abs(analytic - numeric) / scale)


@pytest.mark.parametrize("dims", [[3, 4], [5, 8, 3], [4, 6, 5, 3]])
def test_gradient_matches_finite_differences(dims):
    assert objective_fd_check(dims, seed=3) < 1e-4


def test_sgd_step_zero_gradient_is_noop():
    params = init_params([3, 4, 2], 2)
    zero = Gradients(tuple(np.zeros_like(w) for w in params.weights), tuple(np.zeros_like(b) for b in params.biases))
    np.testing.assert_array_equal(sgd_step(params, zero, 0.1).flat(), params.flat())


def test_sgd_step_scalar():
    params = linear([[2.0]])
    g = Gradients((np.array([[0.5]]),), (np.array([0.0]),))
    assert sgd_step(params, g, 1.0).weights[0][0, 0] == 1.5
    assert params.weights[0][0, 0] == 2.0


def test_two_steps_equal_one_summed_step_for_linear_model():
    params = init_params([3, 2], 4)
    rng = np.random.default_rng(0)
    g1 = Gradients((rng.standard_normal((2, 3)),), (rng.standard_normal(2),))
    g2 = Gradients((rng.standard_normal((2, 3)),), (rng.standard_normal(2),))
    lr1, lr2 = 0.25, 0.5
    twice = sgd_step(sgd_step(params, g1, lr1), g2, lr2)
    once = sgd_step(
        params,
        Gradients((lr1 * g1.weights[0] + lr2 * g2.weights[0],), (lr1 * g1.biases[0] + lr2 * g2.biases[0],)),
        1.0,
    )
    np.testing.assert_allclose(twice.flat(), once.flat(), rtol=0, atol=1e-15)


def test_sgd_step_rejects_non_finite_and_bad_lr():
    params = linear([[1.0]])
    bad = Gradients((np.array([[np.nan]]),), (np.array([0.0]),))
    with pytest.raises(FloatingPointError):
        sgd_step(params, bad, 0.1)
    ok = Gradients((np.array([[1.0]]),), (np.array([0.0]),))
    with pytest.raises(ValueError):
        sgd_step(params, ok, 0.0)


def test_init_is_deterministic_and_seed_sensitive():
    a, b = init_params([6, 5, 3], 9), init_params([6, 5, 3], 9)
    np.testing.assert_array_equal(a.flat(), b.flat())
    assert not np.array_equal(a.flat(), init_params([6, 5, 3], 10).flat())


def test_init_respects_fan_in_bound():
    params = init_params([784, 64, 10], 0)
    for w in params.weights:
        assert np.abs(w).max() <= 1 / np.sqrt(w.shape[1])
    assert all(not b.any() for b in params.biases)


@pytest.mark.parametrize("dims", [[5], [3, 0, 2], []])
def test_init_rejects_bad_dims(dims):
    with pytest.raises(ValueError):
        init_params(dims, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-3, 1.0))
def test_sgd_keeps_params_finite(seed, lr):
    rng = np.random.default_rng(seed)
    params = init_params([6, 8, 4], seed)
    x = rng.standard_normal((5, 6))
    labels = rng.integers(0, 4, 5)
    _, g = batch_objective(forward(params, x), labels, rng.standard_normal((5, 4)), np.ones(5, bool), 1.0, 1.0)
    assert sgd_step(params, backward(params, x, g), lr).is_finite()
