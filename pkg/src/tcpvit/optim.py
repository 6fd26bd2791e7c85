"""AdamW with decoupled weight decay, cosine schedule, global-norm clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptimState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimState,
    lr: float,
    weight_decay: float = 0.01,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> OptimState:
    """One in-place AdamW update of every array in ``params``.

    Decay is applied to the weights directly (``w -= lr * wd * w``), not folded
    into the gradient. Each array is updated independently of the others, so the
    iteration order of ``params`` does not matter.
    """
    if set(params) != set(grads):
        raise KeyError("params and grads have different names")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, w in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(w)
            state.v[name] = np.zeros_like(w)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        if weight_decay:
            w -= lr * weight_decay * w
        w -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


def cosine_schedule(step: int, total_steps: int, lr_max: float) -> float:
    """Cosine annealing from ``lr_max`` at step 0 to 0 at ``total_steps``; no warmup."""
    if total_steps <= 0:
        return lr_max
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return max(0.0, lr_max * 0.5 * (1.0 + math.cos(math.pi * step / total_steps)))


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is at most ``max_norm``.

    Returns the norm before clipping.
    """
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm
