"""Builders for the two classifier architectures.

"fcn-cnn": three conv blocks (128 filters k=8, 256 k=5, 128 k=3), each
followed by batchnorm + ReLU, then global average pooling and a dense
softmax head. Same-padding keeps the temporal length through all blocks,
so the pool averages exactly the input's time steps.

"mean-mlp": four dense layers (128, 128, 64, n_classes) on a per-channel
mean vector, batchnorm + ReLU after each hidden layer, dropout 0.2 on the
input and 0.4 after the first two hidden layers, softmax output.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .net import (
    BatchNorm,
    Conv1d,
    Dense,
    Dropout,
    GlobalAvgPool,
    LayerStack,
    ReLU,
    Softmax,
)

CNN_BLOCKS = ((128, 8), (256, 5), (128, 3))
MLP_WIDTHS = (128, 128, 64)
MLP_INPUT_DROPOUT = 0.2
MLP_HIDDEN_DROPOUT = 0.4


def build_cnn(input_channels: int = 37, input_steps: int = 150,
              n_classes: int = 6, seed: int = 0) -> LayerStack:
    if input_channels < 1:
        raise ConfigError(f"input_channels must be >= 1, got {input_channels}")
    largest_kernel = max(k for _, k in CNN_BLOCKS)
    if input_steps < largest_kernel:
        raise ConfigError(
            f"input_steps must be >= largest kernel ({largest_kernel}), got {input_steps}")
    rng = np.random.default_rng(seed)
    layers = []
    channels = input_channels
    for filters, kernel in CNN_BLOCKS:
        layers.append(Conv1d(channels, filters, kernel, rng))
        layers.append(BatchNorm(filters))
        layers.append(ReLU())
        channels = filters
    layers.append(GlobalAvgPool())
    layers.append(Dense(channels, n_classes, rng))
    layers.append(Softmax())
    stack = LayerStack(layers, (input_channels, input_steps), seed=seed, arch="fcn-cnn")
    stack.rng = rng
    return stack


def build_mlp(input_dim: int = 37, n_classes: int = 6, seed: int = 0) -> LayerStack:
    if input_dim < 1:
        raise ConfigError(f"input_dim must be >= 1, got {input_dim}")
    rng = np.random.default_rng(seed)
    layers = [Dropout(MLP_INPUT_DROPOUT, rng)]
    width_in = input_dim
    for i, width in enumerate(MLP_WIDTHS):
        layers.append(Dense(width_in, width, rng))
        layers.append(BatchNorm(width))
        layers.append(ReLU())
        if i < 2:
            layers.append(Dropout(MLP_HIDDEN_DROPOUT, rng))
        width_in = width
    layers.append(Dense(width_in, n_classes, rng))
    layers.append(Softmax())
    stack = LayerStack(layers, (input_dim,), seed=seed, arch="mean-mlp")
    stack.rng = rng
    return stack


ARCHITECTURES = {
    "fcn-cnn": build_cnn,
    "mean-mlp": build_mlp,
}


def build_architecture(name: str, input_shape: tuple[int, ...],
                       n_classes: int = 6, seed: int = 0) -> LayerStack:
    """Build a named architecture for the given input shape."""
    if name == "fcn-cnn":
        if len(input_shape) != 2:
            raise ConfigError(f"fcn-cnn expects (channels, steps), got {input_shape}")
        return build_cnn(input_shape[0], input_shape[1], n_classes=n_classes, seed=seed)
    if name == "mean-mlp":
        if len(input_shape) != 1:
            raise ConfigError(f"mean-mlp expects (features,), got {input_shape}")
        return build_mlp(input_shape[0], n_classes=n_classes, seed=seed)
    raise ConfigError(
        f"unknown architecture {name!r}; available: {', '.join(sorted(ARCHITECTURES))}")
