"""Pure-numpy implementations of the fused inference kernels.

Mirrors the compiled extension ``bearnet._kernels`` operation for operation;
the agreement test pins the two backends to near-ulp equality.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"

ACT_SILU = 0
ACT_TANH = 1
ACT_RELU = 2


def _activate(x: np.ndarray, act: int) -> np.ndarray:
    if act == ACT_SILU:
        return x * (1.0 / (1.0 + np.exp(-x)))
    if act == ACT_TANH:
        return np.tanh(x)
    if act == ACT_RELU:
        return np.maximum(x, 0.0)
    raise ValueError(f"unknown activation code {act}")


def fused_mlp(x: np.ndarray, weights, biases, act: int) -> np.ndarray:
    """Forward pass of a dense MLP: activation after every layer but the last."""
    if act not in (ACT_SILU, ACT_TANH, ACT_RELU):
        raise ValueError(f"unknown activation code {act}")
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        h = h @ w + b
        if i != last:
            h = _activate(h, act)
    return h
