"""Shared test helpers: finite-difference oracles and small random models."""

from __future__ import annotations

import numpy as np
import pytest

from aeroshm.net import (
    BatchNorm,
    Conv1d,
    Dense,
    Dropout,
    GlobalAvgPool,
    LayerStack,
    ReLU,
    Softmax,
)


def scalar_output(stack, x, class_idx, target="logit"):
    """The differentiated scalar, recomputed via a plain forward pass."""
    if target == "logit":
        return float(stack.logits(x)[class_idx])
    return float(stack.forward(x)[class_idx])


def fd_input_gradient(stack, x, class_idx, target="logit", h=1e-4):
    """Central finite differences of the class scalar w.r.t. every input
    coordinate. Independent of the backward pass."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = scalar_output(stack, x, class_idx, target)
        flat[i] = orig - h
        fm = scalar_output(stack, x, class_idx, target)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def gradient_match_fraction(analytic, numeric, rel_tol=1e-4, abs_tol=1e-6):
    """Fraction of coordinates where the two gradients agree."""
    analytic = np.asarray(analytic).reshape(-1)
    numeric = np.asarray(numeric).reshape(-1)
    diff = np.abs(analytic - numeric)
    ok = diff <= abs_tol + rel_tol * np.maximum(np.abs(analytic), np.abs(numeric))
    return ok.mean()


def random_small_model(rng: np.random.Generator):
    """A random classifier stack: at most 3 parametric layers, at most 8
    channels, at most 16 time steps."""
    n_classes = int(rng.integers(2, 5))
    kind = rng.integers(0, 3)
    if kind == 0:  # dense-only on a vector input
        dim = int(rng.integers(3, 9))
        hidden = int(rng.integers(3, 9))
        mrng = np.random.default_rng(rng.integers(1 << 31))
        layers = [Dense(dim, hidden, mrng), ReLU(), Dense(hidden, n_classes, mrng),
                  Softmax()]
        stack = LayerStack(layers, (dim,), seed=0)
        x = rng.normal(size=(dim,))
        return stack, x
    channels = int(rng.integers(2, 9))
    steps = int(rng.integers(8, 17))
    filters = int(rng.integers(2, 7))
    kernel = int(rng.integers(1, 6))
    mrng = np.random.default_rng(rng.integers(1 << 31))
    layers = [Conv1d(channels, filters, kernel, mrng)]
    if kind == 2:
        layers.append(BatchNorm(filters))
    layers += [ReLU(), GlobalAvgPool(), Dense(filters, n_classes, mrng), Softmax()]
    stack = LayerStack(layers, (channels, steps), seed=0)
    x = rng.normal(size=(channels, steps))
    if kind == 2:  # warm the running statistics so infer mode is nontrivial
        stack.forward(rng.normal(size=(8, channels, steps)), train=True)
    return stack, x


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
