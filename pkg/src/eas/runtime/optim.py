"""SGD with Nesterov momentum and the cosine learning-rate schedule."""

from __future__ import annotations

import math

from .network import NetworkParams


def cosine_lr(t: int, total: int, lr0: float) -> float:
    if not 0 <= t <= total:
        raise ValueError(f"step {t} outside [0, {total}]")
    if total == 0:
        return lr0
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * t / total))


def sgd_nesterov_step(params: NetworkParams, grads: NetworkParams, velocity: NetworkParams,
                      lr: float, momentum: float = 0.9, inplace: bool = False):
    """One Nesterov step in lookahead form.

    ``v' = mu*v - lr*g`` and ``theta' = theta - mu*v + (1 + mu)*v'``.
    Returns ``(params', velocity')``; with ``inplace`` the inputs are updated.
    """
    if not inplace:
        params, velocity = params.copy(), velocity.copy()
    for (i, name, theta), (_, _, g), (_, _, v) in zip(params.trainable(), grads.trainable(),
                                                      velocity.trainable()):
        if theta.shape != g.shape or theta.shape != v.shape:
            raise ValueError(f"layer {i} {name}: shape mismatch")
        v_new = momentum * v - lr * g
        theta += (1.0 + momentum) * v_new - momentum * v
        v[...] = v_new
    return params, velocity
