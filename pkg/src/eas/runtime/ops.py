"""Layer primitives with hand-written backward passes.

Activations are ``(N, C, H, W)``; convolution kernels are stored as
``(k_w, k_h, f_in, f_out)`` and applied as cross-correlation with stride 1 and
zero "same" padding of ``k // 2``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5


def _windows(x: np.ndarray, k: int) -> np.ndarray:
    # (N, C, H, W) padded -> (N, C, Ho, Wo, k_h, k_w)
    return sliding_window_view(x, (k, k), axis=(2, 3))


def conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    k = kernel.shape[0]
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    win = _windows(xp, k)
    # kernel[x, y, i, o] -> (i, y, x, o) to line up with (C, k_h, k_w)
    kt = kernel.transpose(2, 1, 0, 3)
    out = np.tensordot(win, kt, axes=([1, 4, 5], [0, 1, 2]))  # (N, H, W, O)
    out = out.transpose(0, 3, 1, 2)
    out += bias[None, :, None, None]
    return np.ascontiguousarray(out)


def conv2d_backward(x: np.ndarray, kernel: np.ndarray, dout: np.ndarray):
    """Gradients of :func:`conv2d` w.r.t. input, kernel and bias."""
    k = kernel.shape[0]
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    win = _windows(xp, k)  # (N, C, H, W, kh, kw)
    # dK[x, y, i, o] = sum_{n,h,w} win[n, i, h, w, y, x] * dout[n, o, h, w]
    dk = np.tensordot(win, dout, axes=([0, 2, 3], [0, 2, 3]))  # (C, kh, kw, O)
    dk = dk.transpose(2, 1, 0, 3)
    db = dout.sum(axis=(0, 2, 3))
    dp = np.pad(dout, ((0, 0), (0, 0), (p, p), (p, p))) if p else dout
    dwin = _windows(dp, k)  # (N, O, H, W, kh, kw)
    flipped = kernel[::-1, ::-1].transpose(3, 1, 0, 2)  # (O, kh, kw, C)
    dx = np.tensordot(dwin, flipped, axes=([1, 4, 5], [0, 1, 2])).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(dx), np.ascontiguousarray(dk), db


def pool2d(x: np.ndarray, k: int, stride: int, mode: str):
    """Valid (unpadded) pooling. Returns the output and a backward cache."""
    win = _windows(x, k)[:, :, ::stride, ::stride]
    n, c, ho, wo = win.shape[:4]
    flat = win.reshape(n, c, ho, wo, k * k)
    if mode == "max":
        arg = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        return out, arg
    return flat.mean(axis=-1), None


def pool2d_backward(dout: np.ndarray, x_shape, k: int, stride: int, mode: str, arg):
    n, c, h, w = x_shape
    ho, wo = dout.shape[2:]
    dx = np.zeros(x_shape, dtype=dout.dtype)
    if stride == k:
        # non-overlapping windows: scatter through a (ho, k, wo, k) block view
        block = np.zeros((n, c, ho, k, wo, k), dtype=dout.dtype)
        if mode == "max":
            dy, dxx = np.divmod(arg, k)
            nn, cc, ii, jj = np.indices((n, c, ho, wo), sparse=True)
            block[nn, cc, ii, dy, jj, dxx] = dout
        else:
            block += (dout / (k * k))[:, :, :, None, :, None]
        dx[:, :, :ho * k, :wo * k] = block.reshape(n, c, ho * k, wo * k)
        return dx
    rows = np.arange(ho) * stride
    cols = np.arange(wo) * stride
    if mode == "max":
        dy, dxx = np.divmod(arg, k)
        nn, cc, ii, jj = np.indices((n, c, ho, wo), sparse=True)
        np.add.at(dx, (nn, cc, rows[ii] + dy, cols[jj] + dxx), dout)
    else:
        share = dout / (k * k)
        for a in range(k):
            for b in range(k):
                dx[:, :, (rows + a)[:, None], (cols + b)[None, :]] += share
    return dx


def batchnorm_train(z: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = BN_EPS):
    axes = (0, 2, 3) if z.ndim == 4 else (0,)
    shape = (1, -1, 1, 1) if z.ndim == 4 else (1, -1)
    mean = z.mean(axis=axes)
    var = z.var(axis=axes)
    inv = 1.0 / np.sqrt(var + eps)
    zhat = (z - mean.reshape(shape)) * inv.reshape(shape)
    out = gamma.reshape(shape) * zhat + beta.reshape(shape)
    return out, (zhat, inv, mean, var)


def batchnorm_eval(z, gamma, beta, mean, var, eps: float = BN_EPS):
    shape = (1, -1, 1, 1) if z.ndim == 4 else (1, -1)
    scale = gamma / np.sqrt(var + eps)
    return (z - mean.reshape(shape)) * scale.reshape(shape) + beta.reshape(shape)


def batchnorm_backward(dout, gamma, cache):
    zhat, inv = cache[0], cache[1]
    axes = (0, 2, 3) if dout.ndim == 4 else (0,)
    shape = (1, -1, 1, 1) if dout.ndim == 4 else (1, -1)
    m = dout.size // dout.shape[1]
    dgamma = (dout * zhat).sum(axis=axes)
    dbeta = dout.sum(axis=axes)
    dzhat = dout * gamma.reshape(shape)
    dz = (inv.reshape(shape) / m) * (
        m * dzhat - dzhat.sum(axis=axes).reshape(shape)
        - zhat * (dzhat * zhat).sum(axis=axes).reshape(shape))
    return dz, dgamma, dbeta


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))
