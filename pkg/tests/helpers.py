"""Shared generators and numerical oracles for the test suite."""

from __future__ import annotations

import numpy as np

from eas.arch import (DEFAULT_TABLE, ArchitectureSpec, conv, fc, pool, resolve_insertion, softmax,
                      split_blocks, valid_insertions, validate_architecture, widenable)
from eas.runtime import init_params
from eas.transform import Deepen

CONV_PREFIX = DEFAULT_TABLE.conv_levels[:4]
FC_PREFIX = DEFAULT_TABLE.fc_levels[:2]
GROWTH_PREFIX = DEFAULT_TABLE.growth_levels[:3]


def randomize_params(params, rng, scale: float = 1.0):
    """Non-trivial biases and batch-norm state so preservation checks bite."""
    params = params.copy()
    for p in params.layers:
        if p is None:
            continue
        p.bias[...] = 0.1 * scale * rng.standard_normal(p.bias.shape)
        if p.gamma is not None:
            p.gamma[...] = rng.uniform(0.5, 1.5, p.gamma.shape)
            p.beta[...] = 0.1 * rng.standard_normal(p.beta.shape)
            p.mean[...] = 0.1 * rng.standard_normal(p.mean.shape)
            p.var[...] = rng.uniform(0.5, 2.0, p.var.shape)
    return params


def _conv_layer(rng, width):
    return conv(int(width), int(rng.choice([1, 3, 5])), batchnorm=bool(rng.random() < 0.6),
                dropout=float(rng.choice([0.0, 0.0, 0.3])))


def random_plain_spec(rng, image: int | None = None, classes: int = 5) -> ArchitectureSpec:
    """2 to 6 conv/fc layers, widths from the first levels of the width table."""
    image = image or int(rng.choice([8, 12]))
    while True:
        n = int(rng.integers(2, 7))
        n_fc = int(rng.integers(0, min(2, n - 1) + 1))
        layers, hw = [], image
        for i in range(n - n_fc):
            layers.append(_conv_layer(rng, rng.choice(CONV_PREFIX)))
            if i < n - n_fc - 1 and hw >= 4 and rng.random() < 0.4:
                layers.append(pool(2, 2, str(rng.choice(["max", "avg"]))))
                hw //= 2
        if rng.random() < 0.6:
            layers.append(pool(hw, hw, "avg"))
        for _ in range(n_fc):
            layers.append(fc(int(rng.choice(FC_PREFIX)), batchnorm=bool(rng.random() < 0.5),
                             dropout=float(rng.choice([0.0, 0.3]))))
        layers.append(softmax(classes))
        spec = ArchitectureSpec(tuple(layers), input_shape=(3, image, image))
        if validate_architecture(spec).ok and any(valid_insertions(spec)):
            return spec


def random_dense_spec(rng, image: int | None = None, classes: int = 5) -> ArchitectureSpec:
    """One or two dense blocks of 2 to 4 layers, each closed by a 1x1 transition conv."""
    image = image or int(rng.choice([8, 12]))
    n_blocks = int(rng.integers(1, 3))
    layers, blocks, hw = [], [], image
    for b in range(n_blocks):
        size = int(rng.integers(2, 5))
        s = len(layers)
        layers.append(_conv_layer(rng, rng.choice(CONV_PREFIX)))
        for _ in range(size - 1):
            layers.append(_conv_layer(rng, rng.choice(GROWTH_PREFIX)))
        blocks.append((s, len(layers)))
        layers.append(conv(int(rng.choice(CONV_PREFIX)), 1, batchnorm=bool(rng.random() < 0.6)))
        if b < n_blocks - 1:
            layers.append(pool(2, 2, str(rng.choice(["max", "avg"]))))
            hw //= 2
    layers.append(pool(hw, hw, "avg"))
    layers.append(softmax(classes))
    spec = ArchitectureSpec(tuple(layers), input_shape=(3, image, image), connectivity="dense",
                            dense_blocks=tuple(blocks))
    assert validate_architecture(spec).ok, validate_architecture(spec).codes
    return spec


def random_params(spec, rng, dtype=np.float64):
    return randomize_params(init_params(spec, rng, dtype), rng)


def all_insertions(spec, dense: bool | None = None):
    """Every valid deepen action, optionally restricted to dense or plain insertions."""
    out = []
    blocks = split_blocks(spec)
    for blk in blocks:
        limit = len(blk.layers) if blk.kind == "conv" else len(blk.layers) - 1
        sizes = (1, 3, 5) if blk.kind == "conv" else (None,)
        for pos in range(limit + 1):
            for k in sizes:
                ins = resolve_insertion(spec, blk.index, pos, k if k else 3, blocks=blocks)
                if ins is None or (dense is not None and ins.dense != dense):
                    continue
                out.append(Deepen(blk.index, pos, k))
    return out


def widenable_layers(spec):
    return [i for i in range(len(spec.layers)) if widenable(spec, i)]


def rel_error(analytic, numeric, floor: float = 1e-6) -> np.ndarray:
    """``|a - n| / max(|a|, |n|, floor)`` elementwise."""
    a, n = np.asarray(analytic, float), np.asarray(numeric, float)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def central_differences(f, x: np.ndarray, eps: float = 1e-4, index=None) -> np.ndarray:
    """Central differences of scalar ``f`` w.r.t. the entries of ``x`` (modified in place)."""
    flat = x.reshape(-1)
    idx = range(flat.size) if index is None else index
    out = np.zeros(len(idx))
    for k, j in enumerate(idx):
        old = flat[j]
        flat[j] = old + eps
        fp = f()
        flat[j] = old - eps
        fm = f()
        flat[j] = old
        out[k] = (fp - fm) / (2 * eps)
    return out


def smooth_central_differences(f, pattern, x: np.ndarray, eps: float = 1e-4):
    """Central differences plus a mask of coordinates whose stencil stays on one smooth piece.

    ``pattern()`` returns the discrete decisions of the function (ReLU signs,
    max-pool winners). A coordinate whose ``x +/- eps`` evaluations change that
    pattern straddles a kink, where a difference quotient does not estimate the
    derivative.
    """
    flat = x.reshape(-1)
    num = np.zeros(flat.size)
    smooth = np.ones(flat.size, dtype=bool)
    base = pattern()
    for j in range(flat.size):
        old = flat[j]
        flat[j] = old + eps
        fp, pp = f(), pattern()
        flat[j] = old - eps
        fm, pm = f(), pattern()
        flat[j] = old
        num[j] = (fp - fm) / (2 * eps)
        smooth[j] = pp == base and pm == base
    return num, smooth


def activation_pattern(spec, params, x, seed: int) -> bytes:
    """ReLU masks and max-pool winners of a train-mode forward pass."""
    from eas.runtime import forward
    _, cache = forward(spec, params, x, mode="train", seed=seed, return_cache=True)
    parts = []
    for c in cache:
        if "relu" in c:
            parts.append(np.packbits(c["relu"]).tobytes())
        if c.get("arg") is not None:
            parts.append(c["arg"].tobytes())
    return b"".join(parts)
