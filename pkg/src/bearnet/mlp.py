"""Dense multilayer perceptrons with reverse-mode gradients.

Weights are plain float64 arrays owned by :class:`MlpParams`; a forward pass
either runs on the fused inference kernels (``tape=None``) or records onto a
:class:`bearnet.tensor.Tape` for backpropagation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bearnet import kernels
from bearnet.tensor import Tape, add_bias, matmul, relu, silu, tanh_act

ACTIVATIONS = ("silu", "tanh", "relu")

_ACT_TAPED = {"silu": silu, "tanh": tanh_act, "relu": relu}
_ACT_CODE = {
    "silu": kernels.ACT_SILU,
    "tanh": kernels.ACT_TANH,
    "relu": kernels.ACT_RELU,
}


@dataclass(frozen=True)
class MlpSpec:
    """Shape and activation of one MLP."""

    input_width: int
    hidden_widths: tuple[int, ...]
    output_width: int
    activation: str = "silu"
    final_layer_zero_init: bool = False

    def __post_init__(self):
        widths = (self.input_width, *self.hidden_widths, self.output_width)
        if any(w < 1 for w in widths):
            raise ValueError(f"all widths must be >= 1, got {widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"activation {self.activation!r} not in {ACTIVATIONS}"
            )

    @property
    def layer_widths(self) -> tuple[int, ...]:
        return (self.input_width, *self.hidden_widths, self.output_width)


@dataclass
class MlpParams:
    """Per-layer weight matrices and bias vectors matching an MlpSpec."""

    name: str
    spec: MlpSpec
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    def validate(self) -> None:
        widths = self.spec.layer_widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise ValueError(f"{self.name}: layer count mismatch")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (widths[i], widths[i + 1]) or b.shape != (widths[i + 1],):
                raise ValueError(
                    f"{self.name}: layer {i} shapes {w.shape}/{b.shape} do not "
                    f"chain {widths[i]}->{widths[i + 1]}"
                )

    def flat(self) -> list[tuple[str, np.ndarray]]:
        """Named parameter arrays, in a stable order."""
        out = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"{self.name}.W{i}", w))
            out.append((f"{self.name}.b{i}", b))
        return out


def init_mlp(spec: MlpSpec, rng: np.random.Generator, name: str) -> MlpParams:
    """Kaiming-style uniform hidden layers (limit sqrt(6/fan_in), zero bias);
    the final layer is zeroed when the spec asks for it, so the fresh network
    outputs exactly zero."""
    widths = spec.layer_widths
    params = MlpParams(name=name, spec=spec)
    n_layers = len(widths) - 1
    for i in range(n_layers):
        fan_in, fan_out = widths[i], widths[i + 1]
        if i == n_layers - 1 and spec.final_layer_zero_init:
            w = np.zeros((fan_in, fan_out))
        else:
            limit = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        params.weights.append(w)
        params.biases.append(np.zeros(fan_out))
    return params


def mlp_forward(params: MlpParams, x, tape: Tape | None = None):
    """Evaluate the MLP on row-major inputs (n, input_width).

    With ``tape=None`` runs on the fused kernels and returns an ndarray; with
    a tape, parameters are bound as (cached) leaves and every intermediate is
    recorded. ``x`` may be an ndarray or a tape Value.
    """
    data = x.data if hasattr(x, "data") else np.asarray(x, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != params.spec.input_width:
        raise ValueError(
            f"{params.name}: input shape {data.shape} does not end in "
            f"input_width {params.spec.input_width}"
        )
    if not np.isfinite(data).all():
        raise ValueError(f"{params.name}: non-finite input")
    if tape is None:
        return kernels.fused_mlp(
            np.ascontiguousarray(data),
            params.weights,
            params.biases,
            _ACT_CODE[params.spec.activation],
        )
    act = _ACT_TAPED[params.spec.activation]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        wv = tape.get_or_leaf(f"{params.name}.W{i}", w)
        bv = tape.get_or_leaf(f"{params.name}.b{i}", b)
        h = add_bias(matmul(h, wv, tape), bv, tape)
        if i != last:
            h = act(h, tape)
    return h
