"""Channel remapping functions and the kernel surgery they induce."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class RemapFunction:
    """Map from new channel positions to source channels (0-based internally)."""

    source_width: int
    index: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(v) for v in self.index))
        if any(not 0 <= v < self.source_width for v in self.index):
            raise ValueError("remap entries must lie in [0, source_width)")

    @property
    def target_width(self) -> int:
        return len(self.index)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.index, dtype=np.int64)

    def one_based(self) -> list[int]:
        return [v + 1 for v in self.index]

    def replication_counts(self) -> np.ndarray:
        """For each new channel j, the number of new channels sharing its source."""
        counts = np.bincount(self.array, minlength=self.source_width)
        return counts[self.array]

    def is_identity(self) -> bool:
        return self.index == tuple(range(self.source_width))


def sample_remap(f: int, f_hat: int, rng: np.random.Generator) -> RemapFunction:
    """Identity on the first ``f`` channels, uniform draws from them for the rest."""
    if f < 1 or f_hat < f:
        raise ValueError(f"cannot remap {f} channels onto {f_hat}")
    tail = rng.integers(0, f, size=f_hat - f)
    return RemapFunction(f, tuple(range(f)) + tuple(tail.tolist()))


def equivalent_remap(g: RemapFunction, f_prefix: int, f_suffix_total: int) -> RemapFunction:
    """Remap seen by a consumer whose input is ``[prefix, widened, suffix]``.

    Prefix channels map to themselves, the widened segment maps through ``g``
    offset by the prefix, and suffix channels shift back by the added width.
    """
    if f_prefix < 0 or f_suffix_total < 0:
        raise ValueError("segment widths must be non-negative")
    f = g.source_width
    index = (list(range(f_prefix))
             + [f_prefix + v for v in g.index]
             + [f_prefix + f + k for k in range(f_suffix_total)])
    return RemapFunction(f_prefix + f + f_suffix_total, tuple(index))


def insertion_remap(f_prefix: int, selected: Sequence[int], f_suffix_total: int) -> RemapFunction:
    """Remap seen by a consumer after a replicating layer is spliced in after the prefix."""
    if any(not 0 <= v < f_prefix for v in selected):
        raise ValueError("inserted channels must replicate prefix channels")
    index = list(range(f_prefix)) + list(selected) + [f_prefix + k for k in range(f_suffix_total)]
    return RemapFunction(f_prefix + f_suffix_total, tuple(index))


def replicate_outputs(tensor: np.ndarray, remap: RemapFunction) -> np.ndarray:
    """New output channel j copies source channel ``remap(j)`` (last axis)."""
    return np.take(tensor, remap.array, axis=-1)


def compensate_inputs(weight: np.ndarray, remap: RemapFunction, axis: int,
                      spatial: int = 1) -> np.ndarray:
    """Consumer-side surgery: gather input slices by ``remap`` and divide by replication.

    ``spatial`` > 1 handles a fully-connected consumer of a flattened
    ``(C, H, W)`` map, whose feature ``c*H*W + s`` belongs to channel ``c``.
    """
    idx = remap.array
    counts = remap.replication_counts()
    if spatial > 1:
        idx = (idx[:, None] * spatial + np.arange(spatial)).reshape(-1)
        counts = np.repeat(counts, spatial)
    if weight.shape[axis] != remap.source_width * spatial:
        raise ValueError(f"consumer has {weight.shape[axis]} inputs, remap expects "
                         f"{remap.source_width * spatial}")
    shape = [1] * weight.ndim
    shape[axis] = -1
    return np.take(weight, idx, axis=axis) / counts.reshape(shape).astype(weight.dtype)
