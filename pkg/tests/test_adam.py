"""Adam optimizer and global gradient-norm clipping."""

import numpy as np
import pytest

from sol.adam import AdamState, adam_step, clip_grads_, global_grad_norm


def test_global_grad_norm():
    grads = {"a": np.array([3.0]), "b": np.array([[4.0]])}
    assert global_grad_norm(grads) == pytest.approx(5.0)


def test_clip_rescales_only_above_max_norm():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_grads_(grads, max_norm=2.5) == pytest.approx(5.0)
    assert global_grad_norm(grads) == pytest.approx(2.5)
    # direction preserved
    assert grads["a"][0] / grads["b"][0] == pytest.approx(3.0 / 4.0)

    grads = {"a": np.array([0.3]), "b": np.array([0.4])}
    clip_grads_(grads, max_norm=2.5)
    assert grads["a"][0] == 0.3 and grads["b"][0] == 0.4


def test_first_step_is_lr_sized_signed_step():
    # with bias correction the first Adam step is ~lr * sign(grad)
    params = {"w": np.array([1.0, -2.0])}
    grads = {"w": np.array([0.5, -3.0])}
    state = AdamState.init(params)
    out = adam_step(params, grads, state, lr=0.1)
    np.testing.assert_allclose(out["w"], [1.0 - 0.1, -2.0 + 0.1], rtol=1e-6)
    assert state.step == 1


def test_adam_converges_on_quadratic():
    params = {"w": np.array([5.0, -3.0])}
    state = AdamState.init(params)
    for _ in range(2000):
        grads = {"w": 2.0 * params["w"]}
        params = adam_step(params, grads, state, lr=0.05)
    np.testing.assert_allclose(params["w"], [0.0, 0.0], atol=1e-3)


def test_adam_matches_reference_formula():
    rng = np.random.default_rng(0)
    params = {"w": rng.standard_normal(4)}
    state = AdamState.init(params)
    m = np.zeros(4)
    v = np.zeros(4)
    p = params["w"].copy()
    for t in range(1, 6):
        g = rng.standard_normal(4)
        params = adam_step(params, {"w": g}, state, lr=0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        p = p - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        np.testing.assert_allclose(params["w"], p, rtol=1e-12)


def test_non_finite_gradient_raises():
    params = {"w": np.zeros(2)}
    state = AdamState.init(params)
    with pytest.raises(FloatingPointError):
        adam_step(params, {"w": np.array([1.0, np.nan])}, state, lr=0.01)
