"""The meta-controller policy: architecture encoder, wider actor and deeper actor.

Everything runs on single vectors with hand-written backward passes. A step of
the policy is computed by :func:`policy_step`, which either samples choices or
replays given ones; replay with a gradient buffer gives the REINFORCE
gradient, and because sampling and replay share the code the recorded
log-probabilities are reproduced exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..arch import (CONV_FILTER_SIZES, DEFAULT_TABLE, ArchitectureSpec, LayerKind, LayerSpec,
                    WidthTable, split_blocks, valid_insertions, widenable)
from ..transform.actions import Deepen, Widen, apply_to_spec
from .lstm import lstm_step, lstm_step_backward, sigmoid, softplus

WIDER = "wider"
DEEPER = "deeper"


@dataclass(frozen=True)
class ControllerConfig:
    embed_dim: int = 16
    hidden: int = 50  # per direction; the actors see 2 * hidden
    max_blocks: int = 12
    max_positions: int = 32
    filter_sizes: tuple[int, ...] = CONV_FILTER_SIZES
    init_scale: float = 0.3
    table: WidthTable = DEFAULT_TABLE

    def __post_init__(self):
        if min(self.embed_dim, self.hidden, self.max_blocks, self.max_positions) <= 0:
            raise ValueError("controller sizes must be positive")

    @property
    def state_dim(self) -> int:
        return 2 * self.hidden


# ---------------------------------------------------------------------------
# tokens


class UnknownTokenError(ValueError):
    pass


def _conv_widths(table: WidthTable) -> tuple[int, ...]:
    return tuple(sorted(set(table.conv_levels) | set(table.growth_levels)))


@lru_cache(maxsize=16)
def vocabulary(config: ControllerConfig) -> dict[tuple, int]:
    """Token ids: (kind, width bucket, filter bucket) for conv, width bucket for fc."""
    table = config.table
    tokens: list[tuple] = []
    for w in range(len(_conv_widths(table))):
        tokens.extend(("conv", w, k) for k in range(len(config.filter_sizes)))
    tokens.extend(("fc", w) for w in range(len(table.fc_levels)))
    tokens.extend(("pool", mode, k) for mode in ("max", "avg") for k in ("2", "3", "large"))
    tokens.append(("softmax",))
    return {t: i for i, t in enumerate(tokens)}


def layer_token(layer: LayerSpec, config: ControllerConfig) -> tuple:
    table = config.table
    if layer.kind is LayerKind.CONV:
        widths = _conv_widths(table)
        if layer.width not in widths or layer.filter_size not in config.filter_sizes:
            raise UnknownTokenError(f"no token for conv width={layer.width} k={layer.filter_size}")
        return ("conv", widths.index(layer.width), config.filter_sizes.index(layer.filter_size))
    if layer.kind is LayerKind.FC:
        if layer.width not in table.fc_levels:
            raise UnknownTokenError(f"no token for fc width={layer.width}")
        return ("fc", table.fc_levels.index(layer.width))
    if layer.kind is LayerKind.POOL:
        k = str(layer.filter_size) if layer.filter_size in (2, 3) else "large"
        return ("pool", layer.pool_mode, k)
    return ("softmax",)


def token_ids(spec: ArchitectureSpec, config: ControllerConfig) -> list[int]:
    vocab = vocabulary(config)
    return [vocab[layer_token(layer, config)] for layer in spec.layers]


# ---------------------------------------------------------------------------
# parameters


def param_shapes(config: ControllerConfig) -> dict[str, tuple[int, ...]]:
    E, H, D = config.embed_dim, config.hidden, config.state_dim
    return {
        "embed": (len(vocabulary(config)), E),
        "enc_fw_W": (4 * H, E + H), "enc_fw_b": (4 * H,),
        "enc_bw_W": (4 * H, E + H), "enc_bw_b": (4 * H,),
        "wide_w": (D,), "wide_b": (1,),
        "dec_W": (4 * D, E + D), "dec_b": (4 * D,),
        "dec_start": (E,),
        "block_embed": (config.max_blocks, E),
        "index_embed": (config.max_positions, E),
        "block_W": (config.max_blocks, D), "block_b": (config.max_blocks,),
        "index_W": (config.max_positions, D), "index_b": (config.max_positions,),
        "filter_W": (len(config.filter_sizes), D), "filter_b": (len(config.filter_sizes),),
    }


@dataclass
class ControllerParams:
    config: ControllerConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "ControllerParams":
        return ControllerParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def zeros_like(self) -> "ControllerParams":
        return ControllerParams(self.config, {k: np.zeros_like(v) for k, v in self.tensors.items()})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        self.tensors[name] = value

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.tensors.values()])

    def with_flat(self, vector: np.ndarray) -> "ControllerParams":
        out, offset = {}, 0
        for name, value in self.tensors.items():
            out[name] = np.asarray(vector[offset:offset + value.size]).reshape(value.shape).copy()
            offset += value.size
        return ControllerParams(self.config, out)

    def check_finite(self) -> None:
        for name, value in self.tensors.items():
            if not np.all(np.isfinite(value)):
                raise FloatingPointError(f"controller parameter {name} is not finite")


def init_controller(config: ControllerConfig, rng: np.random.Generator) -> ControllerParams:
    """Uniform(-s, s) weights with ``s = init_scale``; zero biases."""
    tensors = {}
    for name, shape in param_shapes(config).items():
        if name.endswith("_b"):
            tensors[name] = np.zeros(shape)
        else:
            tensors[name] = rng.uniform(-config.init_scale, config.init_scale, size=shape)
    return ControllerParams(config, tensors)


def zero_controller(config: ControllerConfig) -> ControllerParams:
    return ControllerParams(config, {n: np.zeros(s) for n, s in param_shapes(config).items()})


# ---------------------------------------------------------------------------
# encoder


@dataclass
class Encoding:
    states: np.ndarray  # (n_layers, 2H)
    final: np.ndarray  # (2H,) terminal hidden states of both directions
    final_cell: np.ndarray  # (2H,)
    cache: tuple = ()


def _encode(spec: ArchitectureSpec, params: ControllerParams) -> Encoding:
    cfg = params.config
    ids = token_ids(spec, cfg)
    X = params["embed"][ids]
    n, H = len(ids), cfg.hidden
    hf, hb = np.zeros((n, H)), np.zeros((n, H))
    caches_f, caches_b = [None] * n, [None] * n
    h, c = np.zeros(H), np.zeros(H)
    for t in range(n):
        h, c, caches_f[t] = lstm_step(params["enc_fw_W"], params["enc_fw_b"], X[t], h, c)
        hf[t] = h
    cf = c
    h, c = np.zeros(H), np.zeros(H)
    for t in range(n - 1, -1, -1):
        h, c, caches_b[t] = lstm_step(params["enc_bw_W"], params["enc_bw_b"], X[t], h, c)
        hb[t] = h
    cb = c
    states = np.concatenate([hf, hb], axis=1)
    return Encoding(states, np.concatenate([hf[-1], hb[0]]), np.concatenate([cf, cb]),
                    (ids, caches_f, caches_b))


def encode_architecture(spec: ArchitectureSpec, params: ControllerParams) -> Encoding:
    """Per-layer states ``[forward_i, backward_i]`` and the concatenated terminal states."""
    return _encode(spec, params)


def _encode_backward(params: ControllerParams, enc: Encoding, dstates: np.ndarray,
                     dfinal: np.ndarray, dfinal_cell: np.ndarray, grads: ControllerParams) -> None:
    cfg = params.config
    H = cfg.hidden
    ids, caches_f, caches_b = enc.cache
    n = len(ids)
    dX = np.zeros((n, cfg.embed_dim))
    dh, dc = dfinal[:H].copy(), dfinal_cell[:H].copy()
    for t in range(n - 1, -1, -1):
        dW, db, dx, dh, dc = lstm_step_backward(params["enc_fw_W"], caches_f[t],
                                                dh + dstates[t, :H], dc)
        grads["enc_fw_W"] += dW
        grads["enc_fw_b"] += db
        dX[t] += dx
    dh, dc = dfinal[H:].copy(), dfinal_cell[H:].copy()
    for t in range(n):
        dW, db, dx, dh, dc = lstm_step_backward(params["enc_bw_W"], caches_b[t],
                                                dh + dstates[t, H:], dc)
        grads["enc_bw_W"] += dW
        grads["enc_bw_b"] += db
        dX[t] += dx
    np.add.at(grads["embed"], ids, dX)


# ---------------------------------------------------------------------------
# actors


def wider_eligible(spec: ArchitectureSpec, table: WidthTable = DEFAULT_TABLE) -> list[int]:
    """Conv and fc layers below their maximum width level."""
    return [i for i in range(len(spec.layers)) if widenable(spec, i, table)]


def wider_probabilities(states: np.ndarray, params: ControllerParams) -> np.ndarray:
    return sigmoid(states @ params["wide_w"] + params["wide_b"][0])


def _bernoulli_logp(z: float, decision: bool) -> float:
    return float(-softplus(-z) if decision else -softplus(z))


@dataclass(frozen=True)
class DeeperOptions:
    """The masked action space of the deeper actor for one architecture."""
    block_kinds: tuple[str, ...]
    positions: tuple[tuple[int, ...], ...]  # valid positions per block

    @property
    def block_mask(self) -> np.ndarray:
        return np.array([len(p) > 0 for p in self.positions], dtype=bool)

    @property
    def empty(self) -> bool:
        return not any(self.positions)


def deeper_options(spec: ArchitectureSpec, config: ControllerConfig) -> DeeperOptions:
    blocks = split_blocks(spec, config.table)[:config.max_blocks]
    valid = valid_insertions(spec, config.table)
    positions = tuple(tuple(p for p in valid[b.index] if p < config.max_positions) for b in blocks)
    return DeeperOptions(tuple(b.kind for b in blocks), positions)


def _masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = np.full_like(logits, -np.inf)
    valid = logits[mask]
    m = valid.max()
    out[mask] = valid - m - np.log(np.exp(valid - m).sum())
    return out


@dataclass(frozen=True)
class StepRecord:
    """One policy step: the architecture it saw, its choices and their log-probs.

    ``choices`` is ``((layer, widen), ...)`` for a wider step and
    ``(block, index, filter_index or None)`` for a deeper step (empty when the
    step was a no-op because no insertion was possible).
    """
    kind: str
    spec: ArchitectureSpec
    choices: tuple
    logps: tuple[float, ...]
    actions: tuple

    @property
    def logp(self) -> float:
        return float(sum(self.logps))

    @property
    def noop(self) -> bool:
        return self.kind == DEEPER and not self.choices


def _wider_step(params, enc, spec, rng, forced, scale, grads, dstates):
    cfg = params.config
    eligible = wider_eligible(spec, cfg.table)
    z = enc.states @ params["wide_w"] + params["wide_b"][0]
    p = sigmoid(z)
    if forced is None:
        u = rng.random(len(eligible))
        decisions = tuple((i, bool(u[k] < p[i])) for k, i in enumerate(eligible))
    else:
        decisions = tuple(forced)
        if [i for i, _ in decisions] != eligible:
            raise ValueError("forced wider decisions do not match the eligible layers")
    logps = tuple(_bernoulli_logp(z[i], d) for i, d in decisions)
    if grads is not None:
        for i, d in decisions:
            dz = scale * (float(d) - p[i])
            grads["wide_w"] += dz * enc.states[i]
            grads["wide_b"][0] += dz
            dstates[i] += dz * params["wide_w"]
    actions = tuple(Widen(i) for i, d in decisions if d)
    return decisions, logps, actions


def _deeper_step(params, enc, spec, rng, forced, scale, grads):
    cfg = params.config
    opts = deeper_options(spec, cfg)
    D = cfg.state_dim
    if opts.empty:
        return (), (), (), np.zeros(D), np.zeros(D)
    if forced is not None and len(forced) == 0:
        raise ValueError("forced no-op on an architecture that admits insertions")
    h, c = enc.final, enc.final_cell
    x = params["dec_start"]
    heads = []  # (head, x, lstm cache, h, mask, logp_vector, choice)
    choices: list = []

    def run_head(name, x, h, c, mask, k):
        h, c, cache = lstm_step(params["dec_W"], params["dec_b"], x, h, c)
        logits = params[name + "_W"] @ h + params[name + "_b"]
        logp = _masked_log_softmax(logits, mask)
        if forced is None:
            prob = np.exp(logp)
            choice = int(rng.choice(len(prob), p=prob / prob.sum()))
        else:
            choice = forced[k]
            if not mask[choice]:
                raise ValueError(f"forced {name} choice {choice} is masked")
        heads.append((name, x, cache, h, logp, choice))
        return h, c, choice

    bmask = np.zeros(cfg.max_blocks, dtype=bool)
    bmask[:len(opts.positions)] = opts.block_mask
    h, c, block = run_head("block", x, h, c, bmask, 0)
    imask = np.zeros(cfg.max_positions, dtype=bool)
    imask[list(opts.positions[block])] = True
    h, c, index = run_head("index", params["block_embed"][block], h, c, imask, 1)
    choices = [block, index]
    filter_size = None
    if opts.block_kinds[block] == "conv":
        fmask = np.ones(len(cfg.filter_sizes), dtype=bool)
        h, c, fidx = run_head("filter", params["index_embed"][index], h, c, fmask, 2)
        choices.append(fidx)
        filter_size = cfg.filter_sizes[fidx]
    else:
        choices.append(None)
    logps = tuple(float(hd[4][hd[5]]) for hd in heads)

    dh0, dc0 = np.zeros(D), np.zeros(D)
    if grads is not None:
        dh, dc = np.zeros(D), np.zeros(D)
        for name, x, cache, hk, logp, choice in reversed(heads):
            dlogits = -scale * np.exp(logp)
            dlogits[choice] += scale
            grads[name + "_W"] += np.outer(dlogits, hk)
            grads[name + "_b"] += dlogits
            dh = dh + params[name + "_W"].T @ dlogits
            dW, db, dx, dh, dc = lstm_step_backward(params["dec_W"], cache, dh, dc)
            grads["dec_W"] += dW
            grads["dec_b"] += db
            if name == "block":
                grads["dec_start"] += dx
            elif name == "index":
                grads["block_embed"][block] += dx
            else:
                grads["index_embed"][index] += dx
        dh0, dc0 = dh, dc
    return tuple(choices), logps, (Deepen(block, index, filter_size),), dh0, dc0


def policy_step(spec: ArchitectureSpec, params: ControllerParams, kind: str,
                rng: np.random.Generator | None = None, forced=None, scale: float = 1.0,
                grads: ControllerParams | None = None) -> StepRecord:
    """Sample (or replay ``forced``) one wider or deeper step.

    With ``grads`` the gradient of ``scale * log pi(choices)`` is accumulated
    into it.
    """
    if kind not in (WIDER, DEEPER):
        raise ValueError(f"unknown step kind {kind!r}")
    if forced is None and rng is None:
        raise ValueError("sampling needs an rng")
    enc = _encode(spec, params)
    D = params.config.state_dim
    dstates = np.zeros((len(spec.layers), D))
    dfinal, dfinal_cell = np.zeros(D), np.zeros(D)
    if kind == WIDER:
        choices, logps, actions = _wider_step(params, enc, spec, rng, forced, scale, grads, dstates)
    else:
        choices, logps, actions, dfinal, dfinal_cell = _deeper_step(params, enc, spec, rng, forced,
                                                                    scale, grads)
    if grads is not None:
        _encode_backward(params, enc, dstates, dfinal, dfinal_cell, grads)
    return StepRecord(kind, spec, choices, logps, actions)


def wider_decisions(enc: Encoding, spec: ArchitectureSpec, params: ControllerParams,
                    rng: np.random.Generator):
    """Bernoulli widen/keep per eligible layer; returns ``(decisions, logps)``."""
    decisions, logps, _ = _wider_step(params, enc, spec, rng, None, 1.0, None, None)
    return decisions, logps


def deeper_decision(enc: Encoding, spec: ArchitectureSpec, params: ControllerParams,
                    rng: np.random.Generator):
    """Returns ``(Deepen action or None, logps)``; ``None`` signals that no insertion exists."""
    _, logps, actions, _, _ = _deeper_step(params, enc, spec, rng, None, 1.0, None)
    return (actions[0] if actions else None), logps


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    start: ArchitectureSpec
    steps: list[StepRecord]
    result: ArchitectureSpec
    reward: float | None = None
    advantage: float | None = None

    @property
    def actions(self) -> list:
        return [a for s in self.steps for a in s.actions]

    @property
    def log_prob(self) -> float:
        return float(sum(s.logp for s in self.steps))


def parse_schedule(text) -> tuple[str, ...]:
    """``"deeper*5,wider*4"`` or a sequence of step kinds."""
    if not isinstance(text, str):
        items = tuple(text)
    else:
        items = []
        for part in filter(None, (p.strip() for p in text.split(","))):
            name, _, count = part.partition("*")
            items.extend([name.strip().lower()] * (int(count) if count else 1))
        items = tuple(items)
    bad = [s for s in items if s not in (WIDER, DEEPER)]
    if bad:
        raise ValueError(f"schedule entries must be 'wider' or 'deeper', got {bad}")
    return items


def rollout(spec: ArchitectureSpec, params: ControllerParams, schedule,
            rng: np.random.Generator) -> Trajectory:
    """Run the schedule, re-encoding the architecture before every step."""
    table = params.config.table
    current = spec
    steps = []
    for kind in parse_schedule(schedule):
        step = policy_step(current, params, kind, rng)
        for action in step.actions:
            current = apply_to_spec(current, action, table)
        steps.append(step)
    return Trajectory(spec, steps, current)


def trajectory_log_prob(traj: Trajectory, params: ControllerParams,
                        scale: float = 1.0, grads: ControllerParams | None = None) -> float:
    """Recompute the log-probability of a trajectory by forcing its choices."""
    total = 0.0
    for step in traj.steps:
        replayed = policy_step(step.spec, params, step.kind, forced=step.choices,
                               scale=scale, grads=grads)
        total += replayed.logp
    return total
