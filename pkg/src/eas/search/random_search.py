"""Random search over the same masked action space the controller uses."""

from __future__ import annotations

import numpy as np

from ..arch import ArchitectureSpec
from ..controller.policy import (WIDER, ControllerConfig, StepRecord, Trajectory,
                                 deeper_options, parse_schedule, wider_eligible)
from ..transform.actions import Deepen, Widen, apply_to_spec


def random_trajectory(spec: ArchitectureSpec, schedule, rng: np.random.Generator,
                      config: ControllerConfig = ControllerConfig()) -> Trajectory:
    """Each unsaturated layer widens with probability 0.5; deepen choices are uniform."""
    current = spec
    steps = []
    for kind in parse_schedule(schedule):
        if kind == WIDER:
            eligible = wider_eligible(current, config.table)
            flips = rng.random(len(eligible)) < 0.5
            choices = tuple((i, bool(f)) for i, f in zip(eligible, flips))
            actions = tuple(Widen(i) for i, f in choices if f)
        else:
            opts = deeper_options(current, config)
            if opts.empty:
                choices, actions = (), ()
            else:
                blocks = np.flatnonzero(opts.block_mask)
                block = int(blocks[rng.integers(len(blocks))])
                positions = opts.positions[block]
                index = int(positions[rng.integers(len(positions))])
                fidx = None
                if opts.block_kinds[block] == "conv":
                    fidx = int(rng.integers(len(config.filter_sizes)))
                choices = (block, index, fidx)
                k = None if fidx is None else config.filter_sizes[fidx]
                actions = (Deepen(block, index, k),)
        steps.append(StepRecord(kind, current, choices, (), actions))
        for action in actions:
            current = apply_to_spec(current, action, config.table)
    return Trajectory(spec, steps, current)


def random_rollout(spec: ArchitectureSpec, schedule, rng: np.random.Generator,
                   config: ControllerConfig = ControllerConfig()) -> list:
    return random_trajectory(spec, schedule, rng, config).actions

