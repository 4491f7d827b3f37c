"""ADAM and a reduce-on-plateau learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """Update ``params`` in place and advance ``state`` by one step.

    All gradients are validated before anything is touched, so a rejected
    call leaves both params and state unchanged.
    """
    for path, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {path!r}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for path, p in params.items():
        g = grads[path]
        m = state.m.get(path)
        if m is None:
            m = state.m[path] = np.zeros_like(p)
            state.v[path] = np.zeros_like(p)
        v = state.v[path]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * (g * g)
        denom = np.sqrt(v / bc2) + state.eps
        p -= (state.lr * (m / bc1) / denom).astype(p.dtype, copy=False)


@dataclass
class PlateauSchedulerState:
    """Mirrors PyTorch's ``ReduceLROnPlateau`` in ``min`` mode with a relative threshold."""

    lr: float = 1e-3
    patience: int = 10
    factor: float = 0.1
    min_lr: float = 1e-6
    threshold: float = 1e-4
    best: float = math.inf
    bad_epochs: int = 0
    eps: float = 1e-8

    def __post_init__(self):
        if not 0 < self.factor < 1:
            raise ValueError(f"factor must be in (0, 1), got {self.factor}")


def plateau_update(state: PlateauSchedulerState, metric: float) -> float:
    """Feed one epoch's validation loss; returns the (possibly reduced) lr."""
    if metric < state.best * (1.0 - state.threshold):
        state.best = metric
        state.bad_epochs = 0
    else:
        state.bad_epochs += 1
    if state.bad_epochs > state.patience:
        new_lr = max(state.lr * state.factor, state.min_lr)
        if state.lr - new_lr > state.eps:
            state.lr = new_lr
        state.bad_epochs = 0
    return state.lr
