import json

import numpy as np
import pytest

from cb2cf import net


def test_dense_forward_values_and_shape_checks():
    weight = np.array([[1.0, 2.0], [0.0, -1.0]])
    bias = np.array([0.5, 0.0])
    y, _ = net.dense_forward(np.array([3.0, 4.0]), weight, bias)
    assert np.allclose(y, [11.5, -4.0])
    with pytest.raises(ValueError):
        net.dense_forward(np.ones(3), weight, bias)
    with pytest.raises(ValueError):
        net.dense_forward(np.ones(2), weight, np.ones(3))


def test_dense_gradients_against_finite_differences():
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal(3)
    target = rng.standard_normal(4)

    def loss_fn(tensors):
        y, cache = net.dense_forward(tensors["x"], tensors["w"], tensors["b"])
        loss, grad_y = net.mse_loss(y, target)
        grad_x, grad_w, grad_b = net.dense_backward(cache, grad_y)
        return loss, {"x": grad_x, "w": grad_w, "b": grad_b}

    tensors = {"x": x0, "w": rng.standard_normal((4, 3)),
               "b": rng.standard_normal(4)}
    assert net.grad_check(loss_fn, tensors) < 1e-6


def test_relu_values_and_subgradient():
    y, cache = net.relu_forward(np.array([-1.0, 0.0, 2.0]))
    assert np.array_equal(y, [0.0, 0.0, 2.0])
    grad = net.relu_backward(cache, np.array([5.0, 5.0, 5.0]))
    assert np.array_equal(grad, [0.0, 0.0, 5.0])  # zero at the kink


def _reference_conv(matrix, filters, bias):
    """Nested-loop convolution + global max with first-index ties."""
    length, dim = matrix.shape
    count, width, _ = filters.shape
    pooled = np.empty(count)
    argmax = np.empty(count, dtype=int)
    for f in range(count):
        best_val, best_pos = -np.inf, 0
        for pos in range(length - width + 1):
            acc = bias[f]
            for w in range(width):
                for d in range(dim):
                    acc += matrix[pos + w, d] * filters[f, w, d]
            if acc > best_val:
                best_val, best_pos = acc, pos
        pooled[f] = best_val
        argmax[f] = best_pos
    return pooled, argmax


def test_conv_matches_nested_loop_reference():
    rng = np.random.default_rng(5)
    matrix = rng.standard_normal((7, 2))
    filters = rng.standard_normal((4, 3, 2))
    bias = rng.standard_normal(4)
    pooled, (_, _, best) = net.conv1d_maxpool_forward(matrix, filters, bias)
    ref_pooled, ref_best = _reference_conv(matrix, filters, bias)
    assert np.allclose(pooled, ref_pooled, atol=1e-12)
    assert np.array_equal(best, ref_best)


def test_conv_filter_equal_to_window_scores_its_squared_norm():
    matrix = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]])
    filters = matrix[:2][None, :, :].copy()  # one filter = first window
    pooled, _ = net.conv1d_maxpool_forward(matrix, filters, np.zeros(1))
    # Window 0 scores 1 + 4 = 5; window 1 scores 0*1 + 0 + 3*0 + 0 = 0.
    assert pooled[0] == pytest.approx(5.0)


def test_conv_tie_routes_gradient_to_first_window():
    # All-zero input: every window activation equals the bias, a full tie.
    matrix = np.zeros((6, 3))
    filters = np.ones((2, 2, 3))
    pooled, cache = net.conv1d_maxpool_forward(matrix, filters, np.array([1.0, 2.0]))
    assert np.array_equal(pooled, [1.0, 2.0])
    grad_matrix, _, grad_bias = net.conv1d_maxpool_backward(cache, np.ones(2))
    assert np.array_equal(grad_bias, [1.0, 1.0])
    assert np.any(grad_matrix[:2] != 0.0)
    assert np.all(grad_matrix[2:] == 0.0)


def test_conv_shape_validation():
    with pytest.raises(ValueError):
        net.conv1d_maxpool_forward(np.zeros((2, 3)), np.zeros((1, 4, 3)),
                                   np.zeros(1))
    with pytest.raises(ValueError):
        net.conv1d_maxpool_forward(np.zeros((4, 3)), np.zeros((1, 2, 2)),
                                   np.zeros(1))


def test_conv_stack_gradients_against_finite_differences():
    rng = np.random.default_rng(3)
    target = rng.standard_normal(3)
    x0 = rng.standard_normal((6, 2))

    def loss_fn(tensors):
        pooled, conv_cache = net.conv1d_maxpool_forward(
            tensors["m"], tensors["f"], tensors["cb"])
        act, relu_cache = net.relu_forward(pooled)
        y, dense_cache = net.dense_forward(act, tensors["w"], tensors["b"])
        loss, grad_y = net.mse_loss(y, target)
        grad_act, grad_w, grad_b = net.dense_backward(dense_cache, grad_y)
        grad_pooled = net.relu_backward(relu_cache, grad_act)
        grad_m, grad_f, grad_cb = net.conv1d_maxpool_backward(conv_cache,
                                                              grad_pooled)
        return loss, {"m": grad_m, "f": grad_f, "cb": grad_cb,
                      "w": grad_w, "b": grad_b}

    tensors = {"m": x0, "f": rng.standard_normal((4, 3, 2)),
               "cb": rng.standard_normal(4),
               "w": rng.standard_normal((3, 4)), "b": rng.standard_normal(3)}
    assert net.grad_check(loss_fn, tensors) < 1e-6


def test_dropout_identity_cases():
    x = np.arange(5, dtype=np.float64)
    y, mask = net.dropout_forward(x, 0.0, None, train=True)
    assert mask is None and np.array_equal(y, x)
    y, mask = net.dropout_forward(x, 0.9, None, train=False)
    assert mask is None and np.array_equal(y, x)
    with pytest.raises(ValueError):
        net.dropout_forward(x, 1.0, None, train=True)


def test_dropout_scales_kept_units_and_masks_gradient():
    rng = np.random.default_rng(0)
    x = np.ones(100_000)
    y, mask = net.dropout_forward(x, 0.3, rng, train=True)
    kept = y > 0
    assert np.all(np.isin(np.round(y[kept], 12), np.round(1.0 / 0.7, 12)))
    assert np.mean(kept) == pytest.approx(0.7, abs=0.01)
    assert np.mean(y) == pytest.approx(1.0, abs=0.02)
    grad = net.dropout_backward(mask, np.ones_like(x))
    assert np.array_equal(grad, mask)
    assert net.dropout_backward(None, x) is x


def test_mse_loss_value_and_gradient():
    loss, grad = net.mse_loss(np.ones(40), np.zeros(40))
    assert loss == pytest.approx(1.0)
    assert np.allclose(grad, 2.0 / 40)
    pred = np.array([1.0, -2.0])
    target = np.array([0.5, 0.0])
    loss, grad = net.mse_loss(pred, target)
    assert loss == pytest.approx((0.25 + 4.0) / 2)
    assert np.allclose(grad, (pred - target))  # 2/n with n=2
    with pytest.raises(ValueError):
        net.mse_loss(np.ones(2), np.ones(3))


def test_l2_penalty_value_and_gradient():
    penalty, grads = net.l2_penalty({"w": np.array([[2.0]])}, 1.0)
    assert penalty == pytest.approx(4.0)
    assert grads["w"][0, 0] == pytest.approx(4.0)
    penalty, grads = net.l2_penalty({"w": np.ones((2, 2))}, 0.0)
    assert penalty == 0.0
    assert np.all(grads["w"] == 0.0)
    with pytest.raises(ValueError):
        net.l2_penalty({}, -0.1)


def test_adam_first_step_closed_form():
    param = np.array([1.0, -2.0])
    grad = np.array([0.5, -0.25])
    state = net.AdamState.zeros_like(param)
    net.adam_update(param, grad, state, lr=1e-3)
    m_hat = grad  # bias correction cancels the (1 - beta) factor at t=1
    v_hat = grad * grad
    expected = np.array([1.0, -2.0]) - 1e-3 * m_hat / (np.sqrt(v_hat) + 1e-8)
    assert np.allclose(param, expected, atol=1e-15)
    assert state.t == 1


def test_adam_zero_gradient_leaves_parameters_unchanged():
    param = np.array([3.0])
    state = net.AdamState.zeros_like(param)
    net.adam_update(param, np.zeros(1), state)
    assert param[0] == 3.0
    assert state.t == 1


def test_adam_drives_a_quadratic_near_zero():
    param = np.array([3.0, -2.0])
    state = net.AdamState.zeros_like(param)
    for _ in range(200):
        net.adam_update(param, 2.0 * param, state, lr=0.05)
    assert float(np.linalg.norm(param)) < 1e-3


def test_adam_optimizer_rejects_unknown_params():
    adam = net.Adam()
    with pytest.raises(KeyError):
        adam.step({"a": np.zeros(2)}, {"b": np.zeros(2)})


def test_adam_row_steps_match_dense_updates_when_all_rows_move():
    rng = np.random.default_rng(6)
    dense = rng.standard_normal((4, 3))
    sparse = dense.copy()
    dense_state = net.AdamState.zeros_like(dense)
    adam = net.Adam(lr=0.01)
    for step in range(5):
        grad = rng.standard_normal((4, 3))
        net.adam_update(dense, grad, dense_state, lr=0.01)
        adam.step_rows("emb", sparse, {r: grad[r] for r in range(4)})
    assert np.allclose(dense, sparse, atol=1e-12)


def test_adam_row_steps_touch_only_given_rows():
    param = np.zeros((3, 2))
    adam = net.Adam(lr=0.1)
    adam.step_rows("emb", param, {1: np.array([1.0, -1.0])})
    assert np.all(param[0] == 0.0) and np.all(param[2] == 0.0)
    assert np.all(param[1] != 0.0)
    before = param.copy()
    adam.step_rows("emb", param, {})
    assert np.array_equal(param, before)


def test_grad_check_accepts_exact_gradients():
    def loss_fn(tensors):
        w = tensors["w"]
        return float(np.sum(w * w)), {"w": 2.0 * w}

    err = net.grad_check(loss_fn, {"w": np.array([1.0, -2.0, 0.5])})
    assert err < 1e-9


def test_grad_check_requires_every_gradient():
    with pytest.raises(KeyError):
        net.grad_check(lambda t: (0.0, {}), {"w": np.zeros(2)})


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        tensors = {"a": rng.standard_normal((3, 4)),
                   "b": rng.standard_normal(7),
                   "scalar": np.array(3.5)}
        meta = {"kind": "test", "note": "x"}
        path = tmp_path / "model.ckpt"
        net.save_checkpoint(path, tensors, meta)
        loaded, loaded_meta = net.load_checkpoint(path)
        assert loaded_meta == meta
        assert set(loaded) == set(tensors)
        for name in tensors:
            assert loaded[name].shape == np.asarray(tensors[name]).shape
            assert np.array_equal(loaded[name], tensors[name])

    def test_rejects_unknown_version(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        manifest = {"version": 999, "tensors": [], "meta": {}}
        path.write_bytes(json.dumps(manifest).encode() + b"\n")
        with pytest.raises(ValueError, match="version"):
            net.load_checkpoint(path)

    def test_rejects_truncated_payload(self, tmp_path):
        path = tmp_path / "trunc.ckpt"
        net.save_checkpoint(path, {"a": np.ones(4)})
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(ValueError, match="truncated"):
            net.load_checkpoint(path)

    def test_rejects_trailing_bytes(self, tmp_path):
        path = tmp_path / "extra.ckpt"
        net.save_checkpoint(path, {"a": np.ones(2)})
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ValueError, match="trailing"):
            net.load_checkpoint(path)
