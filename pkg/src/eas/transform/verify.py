"""Numerical check that two networks compute the same function."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..arch import ArchitectureSpec
from ..runtime.network import NetworkParams, forward


@dataclass(frozen=True)
class PreservationReport:
    max_abs_diff: float
    tolerance: float
    n_inputs: int

    @property
    def passed(self) -> bool:
        return bool(self.max_abs_diff <= self.tolerance)


def verify_preservation(spec: ArchitectureSpec, params: NetworkParams,
                        new_spec: ArchitectureSpec, new_params: NetworkParams,
                        n_inputs: int = 16, tolerance: float = 1e-4, seed: int = 0,
                        inputs: np.ndarray | None = None) -> PreservationReport:
    """Max absolute eval-mode logit difference over seeded standard-normal inputs."""
    if tuple(spec.input_shape) != tuple(new_spec.input_shape):
        raise ValueError(f"input shapes differ: {spec.input_shape} vs {new_spec.input_shape}")
    if spec.num_classes != new_spec.num_classes:
        raise ValueError(f"class counts differ: {spec.num_classes} vs {new_spec.num_classes}")
    if inputs is None:
        rng = np.random.default_rng([seed, 31337])
        inputs = rng.standard_normal((n_inputs, *spec.input_shape))
    a = forward(spec, params, inputs).astype(np.float64)
    b = forward(new_spec, new_params, inputs).astype(np.float64)
    return PreservationReport(float(np.max(np.abs(a - b))), tolerance, len(inputs))
