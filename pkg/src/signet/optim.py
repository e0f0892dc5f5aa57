"""Adam with coupled L2 regularization and global gradient-norm clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericHealthError, ShapeError


@dataclass
class AdamState:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # coupled L2: the gradient of weight_decay * ||theta||^2 is added before the moments
    weight_decay: float = 0.0
    clip_norm: float | None = None
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> AdamState:
        return AdamState(
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            weight_decay=self.weight_decay,
            clip_norm=self.clip_norm,
            step=self.step,
            m={k: v.copy() for k, v in self.m.items()},
            v={k: v.copy() for k, v in self.v.items()},
        )


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update, applied in place and also returned.

    Parameters are visited in sorted key order so the update is independent
    of dict insertion order.
    """
    names = sorted(params)
    for name in names:
        if name not in grads:
            raise ShapeError(f"missing gradient for parameter {name!r}")
        if grads[name].shape != params[name].shape:
            raise ShapeError(
                f"gradient shape {grads[name].shape} != parameter shape {params[name].shape} for {name!r}"
            )
        if not np.all(np.isfinite(grads[name])):
            raise NumericHealthError(f"non-finite gradient for parameter {name!r}")

    effective = {}
    for name in names:
        g = grads[name]
        if state.weight_decay:
            g = g + 2.0 * state.weight_decay * params[name]
        effective[name] = g
    if state.clip_norm is not None:
        norm = global_norm(effective)
        if norm > state.clip_norm:
            factor = state.clip_norm / norm
            effective = {k: g * factor for k, g in effective.items()}

    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name in names:
        g = effective[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        params[name] -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state
