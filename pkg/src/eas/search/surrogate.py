"""Cheap deterministic stand-ins for validation accuracy."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

from ..arch import ArchitectureSpec, LayerKind, serialize


def _unit_hash(text: str, seed: int) -> float:
    digest = hashlib.sha256(f"{seed}|{text}".encode()).digest()
    return int.from_bytes(digest[:8], "little") / 2.0 ** 64


@dataclass(frozen=True)
class DepthSurrogate:
    """Concave in conv depth and in mean log-width, plus a small hashed noise term.

    ``score = base + a (1 - exp(-depth / depth_scale))
    + b (1 - exp(-log2(width / 16) / width_scale)) + noise``, clipped into
    ``[0, 0.999]``. The noise is a pure function of the architecture and seed.
    """
    seed: int = 0
    base: float = 0.25
    depth_gain: float = 0.5
    depth_scale: float = 8.0
    width_gain: float = 0.2
    width_scale: float = 3.0
    noise: float = 0.005

    def __call__(self, spec: ArchitectureSpec) -> float:
        convs = [layer for layer in spec.layers if layer.kind is LayerKind.CONV]
        depth = len(convs)
        widths = [layer.width for layer in spec.layers
                  if layer.kind in (LayerKind.CONV, LayerKind.FC)]
        log_width = sum(math.log2(max(w, 16) / 16.0) for w in widths) / max(len(widths), 1)
        score = (self.base
                 + self.depth_gain * (1.0 - math.exp(-depth / self.depth_scale))
                 + self.width_gain * (1.0 - math.exp(-log_width / self.width_scale)))
        score += self.noise * (2.0 * _unit_hash(serialize(spec), self.seed) - 1.0)
        return min(max(score, 0.0), 0.999)


@dataclass(frozen=True)
class ConstantSurrogate:
    value: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.value < 1.0:
            raise ValueError("surrogate accuracy must lie in [0, 1)")

    def __call__(self, spec: ArchitectureSpec) -> float:
        return self.value


def make_surrogate(name: str, seed: int = 0):
    if name == "depth":
        return DepthSurrogate(seed=seed)
    if name == "constant":
        return ConstantSurrogate()
    raise ValueError(f"unknown surrogate {name!r}")
