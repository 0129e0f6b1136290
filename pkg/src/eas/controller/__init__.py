"""Reinforcement-learning meta-controller."""

from .lstm import lstm_step, lstm_step_backward, sigmoid
from .policy import (DEEPER, WIDER, ControllerConfig, ControllerParams, DeeperOptions, Encoding,
                     StepRecord, Trajectory, UnknownTokenError, deeper_decision, deeper_options,
                     encode_architecture, init_controller, layer_token, param_shapes,
                     parse_schedule, policy_step, rollout, token_ids, trajectory_log_prob,
                     vocabulary, wider_decisions, wider_eligible, wider_probabilities,
                     zero_controller)
from .reinforce import (AdamState, BaselineState, UpdateResult, adam_step, baseline_update,
                        reinforce_loss_and_grads, reinforce_update, reward_transform)

__all__ = [
    "DEEPER", "WIDER", "AdamState", "BaselineState", "ControllerConfig", "ControllerParams",
    "DeeperOptions", "Encoding", "StepRecord", "Trajectory", "UnknownTokenError", "UpdateResult",
    "adam_step", "baseline_update", "deeper_decision", "deeper_options", "encode_architecture",
    "init_controller", "layer_token", "lstm_step", "lstm_step_backward", "param_shapes",
    "parse_schedule", "policy_step", "reinforce_loss_and_grads", "reinforce_update",
    "reward_transform", "rollout", "sigmoid", "token_ids", "trajectory_log_prob", "vocabulary",
    "wider_decisions", "wider_eligible", "wider_probabilities", "zero_controller",
]
