"""Minimal numpy training/inference runtime for the architecture IR."""

from .network import (LayerParams, NetworkParams, NonFiniteError, backward, check_params,
                      cross_entropy, forward, init_params, loss_and_grads, predict)

__all__ = [
    "LayerParams", "NetworkParams", "NonFiniteError", "backward", "check_params",
    "cross_entropy", "forward", "init_params", "loss_and_grads", "predict",
]
