"""Adam with additive L2 weight decay over named numpy arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
              lr: float = 0.01, weight_decay: float = 0.0, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8,
              masks: dict[str, np.ndarray] | None = None) -> None:
    """Update ``params`` in place.

    Weight decay is folded into the gradient as ``weight_decay * param``.
    Coordinates where ``masks[name] == 0`` are never touched.
    """
    masks = masks or {}
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads[name] + weight_decay * p
        mask = masks.get(name)
        if mask is not None:
            g = g * mask
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        update = lr * m_hat / (np.sqrt(v_hat) + eps)
        if mask is not None:
            update = update * mask
        p -= update
