"""Parameter update rules. Adam is the default; plain SGD is kept for tests."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingDivergedError
from .network import Params

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class OptimizerState:
    algorithm: str
    learning_rate: float
    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)


def init_optimizer(params: Params, algorithm: str = "adam", learning_rate: float = 1e-3) -> OptimizerState:
    if algorithm not in ("adam", "sgd"):
        raise ValueError(f"unknown optimizer {algorithm!r}")
    state = OptimizerState(algorithm, float(learning_rate))
    if algorithm == "adam":
        state.m = {i: {k: np.zeros_like(a) for k, a in lp.items()} for i, lp in params.items()}
        state.v = {i: {k: np.zeros_like(a) for k, a in lp.items()} for i, lp in params.items()}
    return state


def global_norm(grads: Params) -> float:
    total = 0.0
    for lp in grads.values():
        for g in lp.values():
            total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_global_norm(grads: Params, max_norm: float) -> float:
    """Scale all gradients in place so their joint norm is at most max_norm."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        for lp in grads.values():
            for k in lp:
                lp[k] = lp[k] * scale
    return norm


def optimizer_step(state: OptimizerState, params: Params, grads: Params):
    """Apply one update in place; returns (params, state) for chaining."""
    for lp in grads.values():
        for g in lp.values():
            if not np.all(np.isfinite(g)):
                raise TrainingDivergedError("non-finite gradient in optimizer step")
    state.step += 1
    lr = state.learning_rate
    if state.algorithm == "sgd":
        for i, lp in grads.items():
            for k, g in lp.items():
                params[i][k] -= lr * g
        return params, state

    t = state.step
    bias1 = 1.0 - ADAM_BETA1 ** t
    bias2 = 1.0 - ADAM_BETA2 ** t
    for i, lp in grads.items():
        for k, g in lp.items():
            m = state.m[i][k]
            v = state.v[i][k]
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            params[i][k] -= lr * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)
    return params, state
