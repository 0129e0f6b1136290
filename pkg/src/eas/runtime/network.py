"""Forward and backward passes over an :class:`ArchitectureSpec`."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from ..arch import ArchitectureSpec, LayerKind, layer_shapes, sources
from . import ops


class NonFiniteError(FloatingPointError):
    def __init__(self, layer: int, where: str = "forward"):
        super().__init__(f"non-finite values at layer {layer} ({where})")
        self.layer = layer


@dataclass
class LayerParams:
    weight: np.ndarray
    bias: np.ndarray
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None
    mean: np.ndarray | None = None
    var: np.ndarray | None = None

    TRAINABLE = ("weight", "bias", "gamma", "beta")

    def copy(self) -> "LayerParams":
        return LayerParams(**{f.name: None if getattr(self, f.name) is None
                              else getattr(self, f.name).copy() for f in fields(self)})

    def items(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                yield f.name, value


@dataclass
class NetworkParams:
    layers: list = field(default_factory=list)

    def copy(self) -> "NetworkParams":
        return NetworkParams([None if p is None else p.copy() for p in self.layers])

    def astype(self, dtype) -> "NetworkParams":
        out = self.copy()
        for p in out.layers:
            if p is not None:
                for name, value in p.items():
                    setattr(p, name, value.astype(dtype))
        return out

    @property
    def dtype(self):
        for p in self.layers:
            if p is not None:
                return p.weight.dtype
        return np.dtype(np.float32)

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, p in enumerate(self.layers):
            if p is not None:
                out.extend((f"{i}.{name}", value) for name, value in p.items())
        return out

    @classmethod
    def from_named(cls, tensors, n_layers: int) -> "NetworkParams":
        layers: list = [None] * n_layers
        grouped: dict[int, dict[str, np.ndarray]] = {}
        for name, value in tensors:
            idx, attr = name.split(".", 1)
            grouped.setdefault(int(idx), {})[attr] = value
        for idx, attrs in grouped.items():
            layers[idx] = LayerParams(**attrs)
        return cls(layers)

    def trainable(self):
        """Yield ``(layer, name, array)`` for every trainable tensor."""
        for i, p in enumerate(self.layers):
            if p is None:
                continue
            for name in LayerParams.TRAINABLE:
                value = getattr(p, name)
                if value is not None:
                    yield i, name, value

    def zeros_like(self) -> "NetworkParams":
        out = []
        for p in self.layers:
            if p is None:
                out.append(None)
                continue
            out.append(LayerParams(**{name: np.zeros_like(value) for name, value in p.items()
                                      if name in LayerParams.TRAINABLE}))
        return NetworkParams(out)


def init_params(spec: ArchitectureSpec, rng: np.random.Generator,
                dtype=np.float32) -> NetworkParams:
    """He-normal kernels, zero biases, unit batch-norm scale."""
    shapes = layer_shapes(spec)
    layers: list = []
    for layer, sh in zip(spec.layers, shapes):
        if layer.kind is LayerKind.POOL:
            layers.append(None)
            continue
        if layer.kind is LayerKind.CONV:
            k = layer.filter_size
            fan_in = k * k * sh.in_channels
            w = rng.standard_normal((k, k, sh.in_channels, layer.width)) * np.sqrt(2.0 / fan_in)
        else:
            fan_in = sh.in_channels * sh.in_hw[0] * sh.in_hw[1]
            w = rng.standard_normal((fan_in, layer.width)) * np.sqrt(2.0 / fan_in)
        p = LayerParams(w.astype(dtype), np.zeros(layer.width, dtype))
        if layer.batchnorm:
            p.gamma = np.ones(layer.width, dtype)
            p.beta = np.zeros(layer.width, dtype)
            p.mean = np.zeros(layer.width, dtype)
            p.var = np.ones(layer.width, dtype)
        layers.append(p)
    return NetworkParams(layers)


def check_params(spec: ArchitectureSpec, params: NetworkParams) -> None:
    shapes = layer_shapes(spec)
    if len(params.layers) != len(spec.layers):
        raise ValueError(f"params have {len(params.layers)} layers, spec has {len(spec.layers)}")
    for i, (layer, sh, p) in enumerate(zip(spec.layers, shapes, params.layers)):
        if layer.kind is LayerKind.POOL:
            if p is not None:
                raise ValueError(f"layer {i}: pooling layer carries parameters")
            continue
        if layer.kind is LayerKind.CONV:
            expected = (layer.filter_size, layer.filter_size, sh.in_channels, layer.width)
        else:
            expected = (sh.in_channels * sh.in_hw[0] * sh.in_hw[1], layer.width)
        if p is None or p.weight.shape != expected or p.bias.shape != (layer.width,):
            got = None if p is None else p.weight.shape
            raise ValueError(f"layer {i}: weight shape {got}, expected {expected}")
        if layer.batchnorm and any(getattr(p, a) is None or getattr(p, a).shape != (layer.width,)
                                   for a in ("gamma", "beta", "mean", "var")):
            raise ValueError(f"layer {i}: batch-norm state missing or misshapen")


def _dropout_mask(shape, rate: float, seed: int, layer: int, dtype) -> np.ndarray:
    rng = np.random.default_rng([seed, layer])
    return ((rng.random(shape) >= rate) / (1.0 - rate)).astype(dtype)


def forward(spec: ArchitectureSpec, params: NetworkParams, batch: np.ndarray,
            mode: str = "eval", seed: int = 0, return_cache: bool = False):
    """Run the network. Returns logits, plus a cache for :func:`backward` if asked.

    In ``eval`` mode dropout is off and batch norm uses running statistics; in
    ``train`` mode batch norm uses batch statistics and dropout masks are drawn
    from ``seed``.
    """
    if tuple(batch.shape[1:]) != tuple(spec.input_shape):
        raise ValueError(f"batch shape {batch.shape[1:]} does not match input {spec.input_shape}")
    train = mode == "train"
    srcs = sources(spec)
    x = np.asarray(batch, dtype=params.dtype)
    outs: dict[int, np.ndarray] = {-1: x}
    cache: list[dict] = []
    for i, layer in enumerate(spec.layers):
        parts = [outs[j] for j in srcs[i]]
        inp = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)
        c: dict = {"inp": inp, "widths": [p.shape[1] for p in parts]}
        if layer.kind is LayerKind.POOL:
            out, c["arg"] = ops.pool2d(inp, layer.filter_size, layer.stride, layer.pool_mode)
        else:
            p = params.layers[i]
            if layer.kind is LayerKind.CONV:
                z = ops.conv2d(inp, p.weight, p.bias)
            else:
                z = inp.reshape(inp.shape[0], -1) @ p.weight + p.bias
            if layer.batchnorm:
                if train:
                    c["z"] = z
                    z, c["bn"] = ops.batchnorm_train(z, p.gamma, p.beta)
                else:
                    z = ops.batchnorm_eval(z, p.gamma, p.beta, p.mean, p.var)
            if layer.activation == "relu":
                c["relu"] = z > 0
                z = np.maximum(z, 0)
            if train and layer.dropout > 0:
                c["drop"] = _dropout_mask(z.shape, layer.dropout, seed, i, z.dtype)
                z = z * c["drop"]
            out = z
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(i)
        outs[i] = out
        c["out"] = out
        cache.append(c)
    logits = outs[len(spec.layers) - 1]
    return (logits, cache) if return_cache else logits


def backward(spec: ArchitectureSpec, params: NetworkParams, cache: list[dict],
             dlogits: np.ndarray) -> NetworkParams:
    """Gradients of a scalar w.r.t. trainable params given d(scalar)/d(logits)."""
    srcs = sources(spec)
    grads = params.zeros_like()
    dout: dict[int, np.ndarray] = {len(spec.layers) - 1: dlogits}
    for i in range(len(spec.layers) - 1, -1, -1):
        if i not in dout:
            continue
        layer, c, d = spec.layers[i], cache[i], dout.pop(i)
        inp = c["inp"]
        if layer.kind is LayerKind.POOL:
            dinp = ops.pool2d_backward(d, inp.shape, layer.filter_size, layer.stride,
                                       layer.pool_mode, c["arg"])
        else:
            p, g = params.layers[i], grads.layers[i]
            if "drop" in c:
                d = d * c["drop"]
            if "relu" in c:
                d = d * c["relu"]
            if layer.batchnorm:
                if "bn" not in c:
                    raise ValueError("backward requires a train-mode forward cache")
                d, g.gamma, g.beta = ops.batchnorm_backward(d, p.gamma, c["bn"])
            if layer.kind is LayerKind.CONV:
                dinp, g.weight, g.bias = ops.conv2d_backward(inp, p.weight, d)
            else:
                flat = inp.reshape(inp.shape[0], -1)
                g.weight = flat.T @ d
                g.bias = d.sum(axis=0)
                dinp = (d @ p.weight.T).reshape(inp.shape)
        if not np.all(np.isfinite(dinp)):
            raise NonFiniteError(i, "backward")
        offset = 0
        for j, w in zip(srcs[i], c["widths"]):
            part = dinp[:, offset:offset + w]
            offset += w
            if j < 0:
                continue
            dout[j] = part if j not in dout else dout[j] + part
    return grads


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. logits."""
    n = logits.shape[0]
    logp = ops.log_softmax(logits)
    loss = -logp[np.arange(n), labels].mean()
    d = np.exp(logp)
    d[np.arange(n), labels] -= 1.0
    return float(loss), d / n


def loss_and_grads(spec: ArchitectureSpec, params: NetworkParams, batch: np.ndarray,
                   labels: np.ndarray, weight_decay: float = 0.0, seed: int = 0,
                   mode: str = "train", return_stats: bool = False):
    """Cross-entropy plus ``weight_decay * 0.5 * ||W||^2`` over kernels, with gradients."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= spec.num_classes:
        raise ValueError("labels outside [0, class_count)")
    if mode != "train" and any(layer.batchnorm for layer in spec.layers):
        raise ValueError("gradients through eval-mode batch norm are not supported")
    logits, cache = forward(spec, params, batch, mode=mode, seed=seed, return_cache=True)
    loss, dlogits = cross_entropy(logits, labels)
    grads = backward(spec, params, cache, dlogits)
    if weight_decay:
        for p, g in zip(params.layers, grads.layers):
            if p is not None:
                loss += 0.5 * weight_decay * float(np.sum(p.weight.astype(np.float64) ** 2))
                g.weight = g.weight + weight_decay * p.weight
    if not np.isfinite(loss):
        raise NonFiniteError(len(spec.layers) - 1, "loss")
    if return_stats:
        stats = {i: c["bn"][2:] for i, c in enumerate(cache) if "bn" in c}
        return loss, grads, stats
    return loss, grads


def predict(spec: ArchitectureSpec, params: NetworkParams, images: np.ndarray,
            batch_size: int = 256) -> np.ndarray:
    """Eval-mode logits, computed in fixed-size chunks."""
    chunks = [forward(spec, params, images[s:s + batch_size])
              for s in range(0, len(images), batch_size)]
    return np.concatenate(chunks, axis=0)
