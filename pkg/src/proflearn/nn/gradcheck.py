"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .network import NetworkSpec, Params, backward, loss_only


def grad_check(spec: NetworkSpec, params: Params, batch, targets, eps: float = 1e-5,
               training: bool = False, seed=0) -> float:
    """Max relative error between analytic gradients and central differences.

    Every parameter entry is perturbed by +/- eps and the loss re-evaluated,
    so keep the instances small. The relative error for one entry is
    |a - n| / max(|a|, |n|, 1e-8). Dropout masks are frozen by the seed, which
    keeps the loss a deterministic function of the parameters.
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps}")
    _, grads = backward(spec, params, batch, targets, training=training, seed=seed)
    worst = 0.0
    for idx, layer_grads in grads.items():
        for name, analytic in layer_grads.items():
            theta = params[idx][name]
            flat = theta.reshape(-1)
            for pos in range(flat.size):
                saved = flat[pos]
                flat[pos] = saved + eps
                plus = loss_only(spec, params, batch, targets, training=training, seed=seed)
                flat[pos] = saved - eps
                minus = loss_only(spec, params, batch, targets, training=training, seed=seed)
                flat[pos] = saved
                numeric = (plus - minus) / (2.0 * eps)
                a = float(analytic.reshape(-1)[pos])
                err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
                worst = max(worst, err)
    return worst
