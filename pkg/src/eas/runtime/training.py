"""Training and evaluation loops."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..arch import ArchitectureSpec
from ..data import LabeledImageSet, augment
from .network import NetworkParams, NonFiniteError, check_params, loss_and_grads, predict
from .optim import cosine_lr, sgd_nesterov_step

log = logging.getLogger(__name__)

BN_MOMENTUM = 0.9


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    lr0: float = 0.02
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_schedule: str = "cosine"
    seed: int = 0
    augment: bool = False

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size <= 0 or self.lr0 <= 0 or self.weight_decay < 0:
            raise ValueError("epochs, batch size, lr0 and weight decay must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.lr_schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, cause: Exception | None = None):
        super().__init__(f"training diverged in epoch {epoch}: {cause}")
        self.epoch = epoch


def train(spec: ArchitectureSpec, params: NetworkParams, dataset: LabeledImageSet,
          config: TrainConfig, val: LabeledImageSet | None = None,
          track_train_acc: bool = True):
    """Train a copy of ``params``; returns ``(params, curve)``.

    The curve holds one dict per epoch with ``loss``, ``train_acc`` and, if a
    validation set is given, ``val_acc``. Schedule restarts on every call.
    """
    check_params(spec, params)
    params = params.copy()
    curve: list[dict] = []
    if config.epochs == 0:
        return params, curve
    n = len(dataset)
    steps_per_epoch = -(-n // config.batch_size)
    total = config.epochs * steps_per_epoch
    velocity = params.zeros_like()
    step = 0
    for epoch in range(config.epochs):
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(n)
        loss_sum = 0.0
        for b in range(steps_per_epoch):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            x = dataset.images[idx]
            if config.augment:
                x = augment(x, np.random.default_rng([config.seed, epoch, b, 1]))
            y = dataset.labels[idx]
            lr = (cosine_lr(step, total, config.lr0) if config.lr_schedule == "cosine"
                  else config.lr0)
            try:
                loss, grads, stats = loss_and_grads(
                    spec, params, x, y, config.weight_decay,
                    seed=config.seed * 1_000_003 + step, return_stats=True)
            except NonFiniteError as exc:
                raise DivergenceError(epoch, exc) from exc
            sgd_nesterov_step(params, grads, velocity, lr, config.momentum, inplace=True)
            for i, (mean, var) in stats.items():
                p = params.layers[i]
                p.mean *= BN_MOMENTUM
                p.mean += (1 - BN_MOMENTUM) * mean
                p.var *= BN_MOMENTUM
                p.var += (1 - BN_MOMENTUM) * var
            loss_sum += loss * len(idx)
            step += 1
        entry = {"epoch": epoch, "loss": loss_sum / n}
        if not np.isfinite(entry["loss"]):
            raise DivergenceError(epoch)
        if track_train_acc:
            entry["train_acc"] = evaluate(spec, params, dataset)
        if val is not None:
            entry["val_acc"] = evaluate(spec, params, val)
        log.debug("epoch %d %s", epoch, entry)
        curve.append(entry)
    return params, curve


def evaluate(spec: ArchitectureSpec, params: NetworkParams, dataset: LabeledImageSet) -> float:
    """Eval-mode accuracy; argmax ties resolve to the lowest class index."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    logits = predict(spec, params, dataset.images)
    return accuracy(logits, dataset.labels)


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    if len(labels) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return float(np.mean(np.argmax(logits, axis=1) == labels))
