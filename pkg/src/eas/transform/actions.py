"""Transformation actions, their canonical text form and architecture-only application."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..arch import (DEFAULT_TABLE, ArchitectureSpec, WidthTable, level_set, insert_layer,
                    next_width_level, resolve_insertion, widen_spec)


class InvalidActionError(ValueError):
    pass


@dataclass(frozen=True)
class Widen:
    layer: int

    def __str__(self) -> str:
        return f"widen layer={self.layer}"


@dataclass(frozen=True)
class Deepen:
    block: int
    index: int
    filter_size: int | None = None

    def __str__(self) -> str:
        text = f"deepen block={self.block} index={self.index}"
        return text if self.filter_size is None else f"{text} k={self.filter_size}"


TransformAction = Widen | Deepen

_WIDEN = re.compile(r"^widen layer=(\d+)$")
_DEEPEN = re.compile(r"^deepen block=(\d+) index=(\d+)(?: k=(\d+))?$")


def format_action(action: TransformAction) -> str:
    return str(action)


def parse_action(text: str) -> TransformAction:
    text = " ".join(text.split())
    m = _WIDEN.match(text)
    if m:
        return Widen(int(m.group(1)))
    m = _DEEPEN.match(text)
    if m:
        k = m.group(3)
        return Deepen(int(m.group(1)), int(m.group(2)), None if k is None else int(k))
    raise ValueError(f"cannot parse action {text!r}")


def apply_to_spec(spec: ArchitectureSpec, action: TransformAction,
                  table: WidthTable = DEFAULT_TABLE) -> ArchitectureSpec:
    """The architecture an action produces, without touching weights."""
    if isinstance(action, Widen):
        if not 0 <= action.layer < len(spec.layers):
            raise InvalidActionError(f"no layer {action.layer}")
        name = level_set(spec, action.layer)
        layer = spec.layers[action.layer]
        if name is None or layer.kind.value == "softmax":
            raise InvalidActionError(f"layer {action.layer} ({layer.kind.value}) cannot be widened")
        nxt = next_width_level(layer.width, name, table)
        if nxt is None:
            raise InvalidActionError(f"layer {action.layer} is at its maximum width")
        return widen_spec(spec, action.layer, nxt)
    ins = resolve_insertion(spec, action.block, action.index, action.filter_size, table)
    if ins is None:
        raise InvalidActionError(f"{action} is not a valid insertion")
    if ins.layer.kind.value == "fc" and action.filter_size is not None:
        raise InvalidActionError("fully-connected insertions carry no filter size")
    return insert_layer(spec, ins)


def replay(spec: ArchitectureSpec, actions, table: WidthTable = DEFAULT_TABLE) -> ArchitectureSpec:
    for action in actions:
        spec = apply_to_spec(spec, action, table)
    return spec
