"""Adaptive-moment gradient optimizer with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """First/second moment accumulators keyed like the parameter map."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    state: AdamState,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    lr: float | None = None,
) -> dict[str, np.ndarray]:
    """One bias-corrected update, applied to the parameter arrays in place.

    ``lr`` overrides the stored learning rate for this step (e.g. a decay
    schedule); the parameter map is iterated in sorted-key order so updates
    are deterministic.
    """
    state.step += 1
    step_lr = state.lr if lr is None else float(lr)
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name in sorted(params):
        p = params[name]
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(
                f"{name}: gradient shape {g.shape} != parameter shape {p.shape}"
            )
        if not np.isfinite(g).all():
            raise ValueError(f"{name}: non-finite gradient")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p -= step_lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def cosine_lr(base_lr: float, step: int, total_steps: int, floor: float = 0.0) -> float:
    """Cosine decay from base_lr to floor over total_steps."""
    if total_steps <= 0:
        return base_lr
    t = min(max(step, 0), total_steps) / total_steps
    return floor + 0.5 * (base_lr - floor) * (1.0 + np.cos(np.pi * t))
