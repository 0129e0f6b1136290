"""Reward shaping, the moving-average baseline, ADAM and the REINFORCE update."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .policy import ControllerParams, Trajectory, trajectory_log_prob

log = logging.getLogger(__name__)

ACC_CLAMP = 1.0 - 1e-6


def tan_half_pi(x: float) -> float:
    """``tan(x * pi / 2)`` as ``sin(x pi/2) / sin((1 - x) pi/2)``.

    The ratio form is exact at ``x = 0.5`` and keeps relative accuracy as
    ``x`` approaches 1.
    """
    return math.sin(x * math.pi / 2.0) / math.sin((1.0 - x) * math.pi / 2.0)


def reward_transform(acc: float, return_flag: bool = False):
    """``tan(acc * pi / 2)``; accuracies at or above 1 are clamped to ``1 - 1e-6``."""
    if not acc >= 0.0:
        raise ValueError(f"accuracy {acc} must be non-negative")
    clamped = acc >= ACC_CLAMP
    if clamped:
        log.warning("accuracy %.8f clamped to %.8f before the reward transform", acc, ACC_CLAMP)
        acc = ACC_CLAMP
    r = tan_half_pi(acc)
    return (r, clamped) if return_flag else r


@dataclass(frozen=True)
class BaselineState:
    value: float = 0.0
    decay: float = 0.95
    initialized: bool = False


def baseline_update(state: BaselineState, reward: float) -> BaselineState:
    if not state.initialized:
        return replace(state, value=float(reward), initialized=True)
    return replace(state, value=state.decay * state.value + (1.0 - state.decay) * float(reward))


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def copy(self) -> "AdamState":
        return AdamState(self.lr, self.beta1, self.beta2, self.eps, self.t,
                         {k: a.copy() for k, a in self.m.items()},
                         {k: a.copy() for k, a in self.v.items()})


def adam_step(params: ControllerParams, grads: ControllerParams, state: AdamState):
    """One bias-corrected ADAM descent step; returns new ``(params, state)``."""
    params, state = params.copy(), state.copy()
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for name, g in grads.tensors.items():
        m = state.m.get(name, np.zeros_like(g))
        v = state.v.get(name, np.zeros_like(g))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1 - b1 ** state.t)
        v_hat = v / (1 - b2 ** state.t)
        params.tensors[name] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


def reinforce_loss_and_grads(trajectories: list[Trajectory], baseline: float,
                             params: ControllerParams):
    """``-(1/K) sum_k (r_k - b) log pi_k`` and its gradient."""
    if not trajectories:
        raise ValueError("REINFORCE needs at least one trajectory")
    grads = params.zeros_like()
    K = len(trajectories)
    loss = 0.0
    for traj in trajectories:
        adv = float(traj.reward) - baseline
        traj.advantage = adv
        if adv == 0.0:
            continue
        logp = trajectory_log_prob(traj, params, scale=-adv / K, grads=grads)
        loss -= adv * logp / K
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite REINFORCE loss")
    return loss, grads


@dataclass
class UpdateResult:
    params: ControllerParams
    adam: AdamState
    baseline: BaselineState
    loss: float
    baseline_used: float


def reinforce_update(trajectories: list[Trajectory], baseline: BaselineState,
                     params: ControllerParams, adam: AdamState) -> UpdateResult:
    """One policy-gradient step over the step's scored trajectories.

    Trajectories without a reward (failed children) are skipped. An
    uninitialized baseline is first set to the batch mean reward, so the very
    first advantages are centred. The baseline then moves once with the mean
    reward of the batch.
    """
    scored = [t for t in trajectories if t.reward is not None]
    if not scored:
        raise ValueError("REINFORCE needs at least one scored trajectory")
    mean_r = float(np.mean([t.reward for t in scored]))
    if not baseline.initialized:
        baseline = baseline_update(baseline, mean_r)
        used = baseline.value
    else:
        used = baseline.value
        baseline = baseline_update(baseline, mean_r)
    loss, grads = reinforce_loss_and_grads(scored, used, params)
    new_params, adam = adam_step(params, grads, adam)
    new_params.check_finite()
    return UpdateResult(new_params, adam, baseline, loss, used)
