"""Per-layer forward and backward checks against independent oracles."""

import numpy as np
import pytest

from aeroshm.errors import ConfigError, ShapeError
from aeroshm.net import (
    BatchNorm,
    Conv1d,
    Dense,
    Dropout,
    GlobalAvgPool,
    ReLU,
    Softmax,
)


def brute_force_conv1d(x, weight, bias):
    """Direct convolution sum with same padding; the oracle for Conv1d."""
    n, c, t = x.shape
    f, _, k = weight.shape
    pl = (k - 1) // 2
    out = np.zeros((n, f, t))
    for b in range(n):
        for fi in range(f):
            for ti in range(t):
                acc = bias[fi]
                for ci in range(c):
                    for j in range(k):
                        src = ti + j - pl
                        if 0 <= src < t:
                            acc += weight[fi, ci, j] * x[b, ci, src]
                out[b, fi, ti] = acc
    return out


def layer_fd_input(layer, x, dout_weights, train=False, h=1e-6):
    """Finite differences of sum(forward(x) * R) w.r.t. x."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float((layer.forward(x, train=train) * dout_weights).sum())
        flat[i] = orig - h
        fm = float((layer.forward(x, train=train) * dout_weights).sum())
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def layer_fd_param(layer, x, dout_weights, name, train=False, h=1e-6):
    grad = np.zeros_like(layer.params[name])
    flat = layer.params[name].reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float((layer.forward(x, train=train) * dout_weights).sum())
        flat[i] = orig - h
        fm = float((layer.forward(x, train=train) * dout_weights).sum())
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


class TestConv1d:
    def test_matches_brute_force(self, rng):
        layer = Conv1d(3, 4, 5, rng)
        x = rng.normal(size=(2, 3, 11))
        expected = brute_force_conv1d(x, layer.params["weight"], layer.params["bias"])
        np.testing.assert_allclose(layer.forward(x), expected, atol=1e-12)

    @pytest.mark.parametrize("kernel", [1, 2, 3, 8])
    def test_same_padding_preserves_length(self, rng, kernel):
        layer = Conv1d(2, 3, kernel, rng)
        out = layer.forward(rng.normal(size=(1, 2, 16)))
        assert out.shape == (1, 3, 16)

    def test_backward_matches_fd(self, rng):
        layer = Conv1d(3, 4, 4, rng)
        x = rng.normal(size=(2, 3, 9))
        r = rng.normal(size=(2, 4, 9))
        layer.forward(x)
        layer.zero_grads()
        dx = layer.backward(r.copy())
        np.testing.assert_allclose(dx, layer_fd_input(layer, x, r), atol=1e-7)
        np.testing.assert_allclose(
            layer.grads["weight"], layer_fd_param(layer, x, r, "weight"), atol=1e-7)
        np.testing.assert_allclose(
            layer.grads["bias"], layer_fd_param(layer, x, r, "bias"), atol=1e-7)

    def test_skip_param_grads_leaves_them_zero(self, rng):
        layer = Conv1d(2, 2, 3, rng)
        x = rng.normal(size=(1, 2, 8))
        layer.forward(x)
        layer.zero_grads()
        layer.backward(np.ones((1, 2, 8)), need_param_grads=False)
        assert np.all(layer.grads["weight"] == 0.0)

    def test_rejects_bad_shapes(self, rng):
        layer = Conv1d(3, 2, 3, rng)
        with pytest.raises(ShapeError):
            layer.forward(np.zeros((1, 4, 10)))
        with pytest.raises(ShapeError):
            layer.forward(np.zeros((1, 3, 2)))


class TestBatchNorm:
    def test_train_normalizes_batch(self, rng):
        layer = BatchNorm(4)
        x = rng.normal(loc=3.0, scale=2.5, size=(16, 4, 10))
        out = layer.forward(x, train=True)
        np.testing.assert_allclose(out.mean(axis=(0, 2)), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.std(axis=(0, 2)), 1.0, atol=1e-6)

    def test_infer_is_affine_per_channel(self, rng):
        layer = BatchNorm(3)
        for _ in range(5):
            layer.forward(rng.normal(size=(8, 3, 6)), train=True)
        x = rng.normal(size=(4, 3, 6))
        a, b = 1.7, -0.4
        out1 = layer.forward(a * x + b)
        # affine map commutes: f(a x + b) = a f(x) + (f(b) - f(0)) elementwise
        scale = layer.params["gamma"] / np.sqrt(layer.buffers["running_var"] + layer.eps)
        out2 = layer.forward(x)
        np.testing.assert_allclose(out1 - out2, (a - 1) * x * scale[None, :, None]
                                   + b * scale[None, :, None], atol=1e-10)

    def test_running_stats_converge(self, rng):
        layer = BatchNorm(2)
        for _ in range(200):
            layer.forward(rng.normal(loc=5.0, scale=3.0, size=(64, 2)), train=True)
        np.testing.assert_allclose(layer.buffers["running_mean"], 5.0, rtol=0.05)
        np.testing.assert_allclose(layer.buffers["running_var"], 9.0, rtol=0.1)

    @pytest.mark.parametrize("shape", [(6, 3), (5, 3, 7)])
    def test_train_backward_matches_fd(self, rng, shape):
        layer = BatchNorm(3)
        layer.params["gamma"] = rng.normal(size=3) + 1.0
        layer.params["beta"] = rng.normal(size=3)
        x = rng.normal(size=shape)
        r = rng.normal(size=shape)
        layer.forward(x, train=True)
        layer.zero_grads()
        dx = layer.backward(r.copy())
        np.testing.assert_allclose(dx, layer_fd_input(layer, x, r, train=True),
                                   atol=1e-6)
        np.testing.assert_allclose(
            layer.grads["gamma"], layer_fd_param(layer, x, r, "gamma", train=True),
            atol=1e-6)

    def test_infer_backward_is_scaled_identity(self, rng):
        layer = BatchNorm(2)
        layer.forward(rng.normal(size=(32, 2, 5)), train=True)
        x = rng.normal(size=(3, 2, 5))
        layer.forward(x)
        dout = rng.normal(size=(3, 2, 5))
        dx = layer.backward(dout.copy())
        scale = layer.params["gamma"] / np.sqrt(layer.buffers["running_var"] + layer.eps)
        np.testing.assert_allclose(dx, dout * scale[None, :, None], atol=1e-12)


class TestReLU:
    def test_forward_and_dead_region(self, rng):
        layer = ReLU()
        x = np.array([[-2.0, 0.0, 3.0]])
        np.testing.assert_array_equal(layer.forward(x), [[0.0, 0.0, 3.0]])
        dx = layer.backward(np.ones_like(x))
        # strictly negative pre-activation contributes zero gradient
        np.testing.assert_array_equal(dx, [[0.0, 0.0, 1.0]])


class TestGlobalAvgPool:
    def test_forward_mean(self, rng):
        layer = GlobalAvgPool()
        x = rng.normal(size=(2, 3, 10))
        np.testing.assert_allclose(layer.forward(x), x.mean(axis=2))

    def test_backward_uniform_share(self, rng):
        t = 12
        layer = GlobalAvgPool()
        layer.forward(rng.normal(size=(2, 3, t)))
        dout = rng.normal(size=(2, 3))
        dx = layer.backward(dout)
        # each time step receives exactly 1/T of the pooled gradient
        np.testing.assert_array_equal(dx, np.repeat(dout[:, :, None], t, axis=2) / t)


class TestDense:
    def test_backward_matches_fd(self, rng):
        layer = Dense(5, 3, rng)
        x = rng.normal(size=(4, 5))
        r = rng.normal(size=(4, 3))
        layer.forward(x)
        layer.zero_grads()
        dx = layer.backward(r.copy())
        np.testing.assert_allclose(dx, layer_fd_input(layer, x, r), atol=1e-8)
        np.testing.assert_allclose(
            layer.grads["weight"], layer_fd_param(layer, x, r, "weight"), atol=1e-8)


class TestDropout:
    def test_infer_is_passthrough(self, rng):
        layer = Dropout(0.4, rng)
        x = rng.normal(size=(5, 8))
        np.testing.assert_array_equal(layer.forward(x, train=False), x)

    def test_train_inverted_scaling(self):
        layer = Dropout(0.5, np.random.default_rng(7))
        x = np.ones((2000, 10))
        out = layer.forward(x, train=True)
        kept = out[out != 0.0]
        np.testing.assert_allclose(kept, 2.0)  # 1 / (1 - rate)
        assert abs(out.mean() - 1.0) < 0.05

    def test_backward_uses_same_mask(self, rng):
        layer = Dropout(0.3, rng)
        x = rng.normal(size=(6, 4))
        out = layer.forward(x, train=True)
        mask = out / np.where(x == 0.0, 1.0, x)
        dx = layer.backward(np.ones_like(x))
        np.testing.assert_allclose(dx, mask, atol=1e-12)

    def test_rejects_bad_rate(self, rng):
        with pytest.raises(ConfigError):
            Dropout(1.0, rng)


class TestSoftmax:
    def test_rows_sum_to_one(self, rng):
        layer = Softmax()
        p = layer.forward(rng.normal(scale=10.0, size=(50, 6)))
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(p > 0.0) and np.all(p < 1.0)

    def test_backward_matches_jacobian(self, rng):
        layer = Softmax()
        z = rng.normal(size=(1, 4))
        p = layer.forward(z)[0]
        jac = np.diag(p) - np.outer(p, p)  # analytic softmax Jacobian
        for k in range(4):
            layer.forward(z)
            seed = np.zeros((1, 4))
            seed[0, k] = 1.0
            np.testing.assert_allclose(layer.backward(seed)[0], jac[k], atol=1e-12)
