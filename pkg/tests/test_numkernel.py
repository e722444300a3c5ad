import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from taman.errors import CacheError, LabelError, ShapeError
from taman.numkernel import (
    MlpParams,
    SgdState,
    grad_check,
    mlp_backward,
    mlp_forward,
    neg_entropy,
    relative_error,
    sgd_step,
    softmax,
    softmax_cross_entropy,
)


def linear(w, b):
    return MlpParams([(np.array(w, dtype=np.float64), np.array(b, dtype=np.float64))])


# ----- forward -----

def test_forward_single_affine():
    out, _ = mlp_forward(linear([[2.0]], [1.0]), np.array([[3.0]]))
    assert out.tolist() == [[7.0]]


def test_forward_zero_params_gives_zero():
    p = MlpParams([(np.zeros((4, 3)), np.zeros(3)), (np.zeros((3, 2)), np.zeros(2))])
    out, _ = mlp_forward(p, np.random.default_rng(0).standard_normal((5, 4)))
    assert np.all(out == 0)


def test_forward_rectifier_kills_negative_hidden():
    p = MlpParams([(np.ones((1, 1)), np.zeros(1)), (np.ones((1, 1)), np.zeros(1))])
    out, _ = mlp_forward(p, np.array([[-1.0]]))
    assert out.tolist() == [[0.0]]


def test_forward_dimension_mismatch_names_dims():
    with pytest.raises(ShapeError, match="3 columns.*in-dim 2"):
        mlp_forward(MlpParams.init([2, 4], np.random.default_rng(0)), np.zeros((1, 3), np.float32))


def test_params_must_chain():
    with pytest.raises(ShapeError):
        MlpParams([(np.zeros((2, 3)), np.zeros(3)), (np.zeros((4, 1)), np.zeros(1))])


# ----- backward -----

def test_backward_single_affine():
    p = linear([[2.0]], [0.0])
    _, cache = mlp_forward(p, np.array([[3.0]]))
    grads, dx = mlp_backward(p, cache, np.array([[1.0]]))
    (dw, db), = grads
    assert dw.tolist() == [[3.0]] and db.tolist() == [1.0] and dx.tolist() == [[2.0]]


def test_backward_zero_upstream():
    p = MlpParams.init([3, 5, 2], np.random.default_rng(1), np.float64)
    x = np.random.default_rng(2).standard_normal((4, 3))
    _, cache = mlp_forward(p, x)
    grads, dx = mlp_backward(p, cache, np.zeros((4, 2)))
    assert all(not dw.any() and not db.any() for dw, db in grads) and not dx.any()


def test_backward_shapes_mirror_params():
    p = MlpParams.init([3, 5, 2], np.random.default_rng(1))
    x = np.ones((4, 3), np.float32)
    _, cache = mlp_forward(p, x)
    grads, dx = mlp_backward(p, cache, np.ones((4, 2), np.float32))
    assert [(g[0].shape, g[1].shape) for g in grads] == [(w.shape, b.shape) for w, b in p.layers]
    assert dx.shape == x.shape


def test_backward_rejects_foreign_cache():
    p = MlpParams.init([3, 2], np.random.default_rng(1))
    q = MlpParams.init([3, 2], np.random.default_rng(2))
    _, cache = mlp_forward(p, np.ones((1, 3), np.float32))
    with pytest.raises(CacheError):
        mlp_backward(q, cache, np.ones((1, 2), np.float32))


def test_backward_rejects_wrong_upstream_shape():
    p = MlpParams.init([3, 2], np.random.default_rng(1))
    _, cache = mlp_forward(p, np.ones((2, 3), np.float32))
    with pytest.raises(ShapeError):
        mlp_backward(p, cache, np.ones((3, 2), np.float32))


def test_two_layer_backward_matches_finite_differences():
    rng = np.random.default_rng(3)
    p = MlpParams.init([3, 6, 2], rng, np.float64)
    x = rng.uniform(-2, 2, (5, 3))
    target = rng.standard_normal((5, 2))
    params = p.named_arrays()

    def loss_fn():
        out, cache = mlp_forward(p, x)
        resid = out - target
        grads, _ = mlp_backward(p, cache, resid)
        g = {}
        for i, (dw, db) in enumerate(grads):
            g[f"{i}.W"], g[f"{i}.b"] = dw, db
        return 0.5 * float(np.sum(resid ** 2)), g

    report = grad_check(loss_fn, params, eps=1e-6)
    assert report.passed and report.worst < 1e-4, report


def test_input_grad_matches_finite_differences():
    rng = np.random.default_rng(4)
    p = MlpParams.init([3, 4, 2], rng, np.float64)
    x = rng.uniform(-2, 2, (2, 3))
    up = rng.standard_normal((2, 2))
    _, cache = mlp_forward(p, x)
    _, dx = mlp_backward(p, cache, up)
    eps = 1e-6
    num = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        num[idx] = (np.sum(mlp_forward(p, xp)[0] * up) - np.sum(mlp_forward(p, xm)[0] * up)) / (2 * eps)
    assert relative_error(dx, num).max() < 1e-4


# ----- softmax / cross-entropy -----

def test_cross_entropy_symmetric_logits():
    loss, grad = softmax_cross_entropy(np.array([[0.0, 0.0]]), [0])
    assert loss == pytest.approx(math.log(2), abs=1e-12)
    assert grad.tolist() == [[-0.5, 0.5]]


def test_cross_entropy_grad_scaled_by_batch():
    _, grad = softmax_cross_entropy(np.zeros((4, 2)), [0, 0, 1, 1])
    np.testing.assert_allclose(grad[0], [-0.125, 0.125])


def test_cross_entropy_saturated_does_not_overflow():
    loss, grad = softmax_cross_entropy(np.array([[1000.0, 0.0]], dtype=np.float32), [0])
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.isfinite(grad))


def test_cross_entropy_direct_formula():
    loss, _ = softmax_cross_entropy(np.array([[1.0, 0.0]]), [1])
    assert loss == pytest.approx(math.log(1 + math.e), abs=1e-12)
    assert loss == pytest.approx(1.3133, abs=1e-4)


def test_cross_entropy_bad_label():
    with pytest.raises(LabelError):
        softmax_cross_entropy(np.zeros((1, 2)), [2])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (3, 5), elements=st.floats(-50, 50)))
def test_softmax_rows_sum_to_one_and_ce_nonnegative(logits):
    assert np.allclose(softmax(logits).sum(axis=1), 1.0, atol=1e-6)
    loss, _ = softmax_cross_entropy(logits, [0, 1, 4])
    assert loss >= 0


def test_neg_entropy_zero_log_zero():
    assert neg_entropy(np.array([1.0, 0.0])) == 0.0
    assert neg_entropy(np.array([0.5, 0.5])) == pytest.approx(-math.log(2))


# ----- SGD -----

def test_sgd_plain_step():
    w = {"w": np.array([1.0])}
    sgd_step(w, {"w": np.array([2.0])}, SgdState(lr=0.1))
    assert w["w"][0] == pytest.approx(0.8)


def test_sgd_momentum_recurrence():
    # hand recurrence: v1 = 1, w1 = -1; v2 = 0.9 + 1 = 1.9, w2 = -2.9
    w = {"w": np.array([0.0])}
    state = SgdState(lr=1.0, momentum=0.9)
    sgd_step(w, {"w": np.array([1.0])}, state)
    assert w["w"][0] == pytest.approx(-1.0) and state.velocity["w"][0] == pytest.approx(1.0)
    sgd_step(w, {"w": np.array([1.0])}, state)
    assert state.velocity["w"][0] == pytest.approx(1.9) and w["w"][0] == pytest.approx(-2.9)


def test_sgd_zero_grad_decays_velocity_only():
    w = {"w": np.array([5.0])}
    state = SgdState(lr=1.0, momentum=0.5, velocity={"w": np.array([2.0])})
    sgd_step(w, {"w": np.array([0.0])}, state)
    assert state.velocity["w"][0] == pytest.approx(1.0)
    assert w["w"][0] == pytest.approx(4.0)  # lr * v still moves the weight
    w2 = {"w": np.array([5.0])}
    sgd_step(w2, {"w": np.array([0.0])}, SgdState(lr=1.0, momentum=0.5))
    assert w2["w"][0] == 5.0


def test_sgd_weight_decay_term():
    w = {"w": np.array([2.0])}
    sgd_step(w, {"w": np.array([0.0])}, SgdState(lr=0.5, weight_decay=0.1))
    assert w["w"][0] == pytest.approx(2.0 - 0.5 * 0.2)


def test_sgd_shape_mismatch():
    with pytest.raises(ShapeError):
        sgd_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, SgdState(lr=0.1))


def test_sgd_monotone_on_convex_quadratic():
    a = np.diag([1.0, 3.0, 0.5])
    w = {"w": np.array([1.0, -2.0, 4.0])}
    state = SgdState(lr=0.5)  # below 2 / max curvature
    prev = math.inf
    for _ in range(50):
        f = 0.5 * w["w"] @ a @ w["w"]
        assert f <= prev
        prev = f
        sgd_step(w, {"w": a @ w["w"]}, state)


# ----- grad_check -----

def test_grad_check_square():
    w = np.array([3.0])
    report = grad_check(lambda: (float(w[0] ** 2), {"w": 2 * w}), {"w": w}, eps=1e-4)
    assert report.passed and report.worst < 1e-6


def test_grad_check_constant():
    w = np.array([1.0, 2.0])
    report = grad_check(lambda: (4.0, {"w": np.zeros(2)}), {"w": w})
    assert report.passed and report.worst == 0.0


def test_grad_check_reports_nonfinite():
    w = np.array([0.0])
    report = grad_check(lambda: (float(1.0 / w[0]) if w[0] > 0 else math.inf, {"w": np.zeros(1)}), {"w": w})
    assert not report.passed and report.failure


def test_grad_check_flags_wrong_gradient():
    w = np.array([3.0])
    report = grad_check(lambda: (float(w[0] ** 2), {"w": 3 * w}), {"w": w})
    assert not report.passed
