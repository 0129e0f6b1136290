"""A single LSTM cell on vectors, with an explicit backward pass."""

from __future__ import annotations

import numpy as np


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softplus(z):
    return np.logaddexp(0.0, z)


def lstm_step(W: np.ndarray, b: np.ndarray, x: np.ndarray, h: np.ndarray, c: np.ndarray):
    """One step. ``W`` is ``(4H, D + H)`` with gate rows ordered i, f, g, o."""
    H = h.shape[0]
    xh = np.concatenate([x, h])
    z = W @ xh + b
    i = sigmoid(z[:H])
    f = sigmoid(z[H:2 * H])
    g = np.tanh(z[2 * H:3 * H])
    o = sigmoid(z[3 * H:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (xh, i, f, g, o, c, tc)


def lstm_step_backward(W: np.ndarray, cache, dh: np.ndarray, dc: np.ndarray):
    """Returns ``(dW, db, dx, dh_prev, dc_prev)``."""
    xh, i, f, g, o, c, tc = cache
    H = dh.shape[0]
    do = dh * tc
    dc_new = dc + dh * o * (1.0 - tc * tc)
    di = dc_new * g
    dg = dc_new * i
    df = dc_new * c
    dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)])
    dxh = W.T @ dz
    D = xh.shape[0] - H
    return np.outer(dz, xh), dz, dxh[:D], dxh[D:], dc_new * f
