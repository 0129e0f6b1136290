"""Function-preserving widen and deepen operations on (spec, params) pairs.

All operations return new values and leave their inputs untouched.
"""

from __future__ import annotations

import numpy as np

from ..arch import (DEFAULT_TABLE, ArchitectureSpec, Insertion, LayerKind, WidthTable,
                    check_valid, expanded_sources, insert_layer, layer_shapes, level_set,
                    next_width_level, resolve_insertion, split_blocks, widen_spec)
from ..runtime.network import LayerParams, NetworkParams, check_params, forward
from ..runtime.ops import BN_EPS
from .actions import Deepen, InvalidActionError, TransformAction, Widen
from .remap import (RemapFunction, compensate_inputs, equivalent_remap, insertion_remap,
                    replicate_outputs, sample_remap)


class SaturatedError(InvalidActionError):
    pass


def _input_axis(spec: ArchitectureSpec, m: int) -> int:
    return 2 if spec.layers[m].kind is LayerKind.CONV else 0


def _flatten_factor(spec: ArchitectureSpec, m: int, shapes) -> int:
    if spec.layers[m].kind is LayerKind.CONV:
        return 1
    h, w = shapes[m].in_hw
    return h * w


def _segment_layout(spec: ArchitectureSpec, m: int, target: int, shapes):
    """Channel widths before and after ``target`` in consumer ``m``'s input."""
    exp = expanded_sources(spec, m)
    if target not in exp:
        return None
    pos = exp.index(target)
    width = {j: (spec.input_shape[0] if j < 0 else shapes[j].out_channels) for j in exp}
    prefix = sum(width[j] for j in exp[:pos])
    suffix = sum(width[j] for j in exp[pos + 1:])
    return exp, prefix, suffix


def consumer_remaps(spec: ArchitectureSpec, layer: int, g: RemapFunction):
    """``{consumer: remap}`` for every parametric layer that reads ``layer``'s output."""
    shapes = layer_shapes(spec)
    out = {}
    for m in range(layer + 1, len(spec.layers)):
        if not spec.layers[m].parametric:
            continue
        layout = _segment_layout(spec, m, layer, shapes)
        if layout is None:
            continue
        _, prefix, suffix = layout
        out[m] = g if prefix == 0 and suffix == 0 else equivalent_remap(g, prefix, suffix)
    return out


def _widen(spec, params, layer, new_width, rng, table):
    check_valid(spec, table)
    check_params(spec, params)
    if not 0 <= layer < len(spec.layers):
        raise InvalidActionError(f"no layer {layer}")
    target = spec.layers[layer]
    if target.kind is LayerKind.SOFTMAX:
        raise InvalidActionError("the softmax layer cannot be widened")
    if target.kind is LayerKind.POOL:
        raise InvalidActionError("pooling layers cannot be widened")
    if new_width is None:
        new_width = next_width_level(target.width, level_set(spec, layer), table)
        if new_width is None:
            raise SaturatedError(f"layer {layer} is already at its widest level")
    if new_width < target.width:
        raise InvalidActionError(f"cannot narrow layer {layer} from {target.width} to {new_width}")
    rng = np.random.default_rng() if rng is None else rng

    g = sample_remap(target.width, new_width, rng)
    new_spec = widen_spec(spec, layer, new_width)
    new_params = params.copy()
    if g.is_identity():
        return new_spec, new_params

    lp = new_params.layers[layer]
    lp.weight = replicate_outputs(lp.weight, g)
    for name in ("bias", "gamma", "beta", "mean", "var"):
        value = getattr(lp, name)
        if value is not None:
            setattr(lp, name, replicate_outputs(value, g))

    shapes = layer_shapes(spec)
    for m, remap in consumer_remaps(spec, layer, g).items():
        mp = new_params.layers[m]
        mp.weight = compensate_inputs(mp.weight, remap, _input_axis(spec, m),
                                      _flatten_factor(spec, m, shapes))
    return new_spec, new_params


def widen_plain(spec: ArchitectureSpec, params: NetworkParams, layer: int,
                new_width: int | None = None, rng: np.random.Generator | None = None,
                table: WidthTable = DEFAULT_TABLE):
    """Net2Wider on a plain network: replicate outputs by a random remap, rescale the consumer."""
    if spec.dense:
        raise InvalidActionError("widen_plain needs a plain architecture; use widen_dense")
    return _widen(spec, params, layer, new_width, rng, table)


def widen_dense(spec: ArchitectureSpec, params: NetworkParams, layer: int,
                new_width: int | None = None, rng: np.random.Generator | None = None,
                table: WidthTable = DEFAULT_TABLE):
    """Net2Wider with dense connectivity: every later consumer gets its equivalent remap."""
    if not spec.dense:
        raise InvalidActionError("widen_dense needs a dense architecture")
    return _widen(spec, params, layer, new_width, rng, table)


def widen(spec, params, layer, new_width=None, rng=None, table: WidthTable = DEFAULT_TABLE):
    return _widen(spec, params, layer, new_width, rng, table)


# ---------------------------------------------------------------------------
# deepen


def _bn_undo(layer_params: LayerParams, mean: np.ndarray, var: np.ndarray) -> None:
    """Scale and shift that invert the normalization for the given statistics."""
    dtype = layer_params.weight.dtype
    mean = np.asarray(mean, dtype=dtype)
    var = np.asarray(var, dtype=dtype)
    layer_params.gamma = np.sqrt(var + dtype.type(BN_EPS)).astype(dtype)
    layer_params.beta = mean.copy()
    layer_params.mean = mean.copy()
    layer_params.var = var.copy()


def _calibration_input(spec, params, g, calibration):
    """Eval-mode input that a layer inserted at index ``g`` would receive."""
    if calibration is None:
        return None
    _, cache = forward(spec, params, calibration, mode="eval", return_cache=True)
    return cache[g]["inp"]


def _check_filter_size(filter_size):
    if filter_size is not None and filter_size % 2 == 0:
        raise InvalidActionError(f"filter size {filter_size} is even; identity filters need a centre")


def _identity_insertion(spec, params, ins: Insertion, calibration):
    g, new = ins.index, ins.layer
    inp = _calibration_input(spec, params, g, calibration)
    dtype = params.dtype
    if new.kind is LayerKind.CONV:
        k, f = new.filter_size, new.width
        weight = np.zeros((k, k, f, f), dtype=dtype)
        weight[k // 2, k // 2, np.arange(f), np.arange(f)] = 1
        axes = (0, 2, 3)
    else:
        weight = np.eye(new.width, dtype=dtype)
        axes = (0,)
        if inp is not None:
            inp = inp.reshape(len(inp), -1)
    lp = LayerParams(weight, np.zeros(new.width, dtype=dtype))
    if new.batchnorm:
        if inp is None:
            _bn_undo(lp, np.zeros(new.width), np.ones(new.width))
        else:
            _bn_undo(lp, inp.mean(axis=axes), inp.var(axis=axes))
    new_params = params.copy()
    new_params.layers.insert(g, lp)
    return insert_layer(spec, ins), new_params


def _dense_insertion(spec, params, ins: Insertion, rng, calibration):
    g, new = ins.index, ins.layer
    new_spec = insert_layer(spec, ins)
    shapes_new = layer_shapes(new_spec)
    f_in = shapes_new[g].in_channels
    width = new.width
    selected = rng.integers(0, f_in, size=width)

    dtype = params.dtype
    k = new.filter_size
    weight = np.zeros((k, k, f_in, width), dtype=dtype)
    weight[k // 2, k // 2, selected, np.arange(width)] = 1
    lp = LayerParams(weight, np.zeros(width, dtype=dtype))
    if new.batchnorm:
        inp = _calibration_input(spec, params, g, calibration) if calibration is not None else None
        if inp is None:
            _bn_undo(lp, np.zeros(width), np.ones(width))
        else:
            # in the old network, layer g consumes (a superset of) the same prefix
            prefix = inp[:, :f_in]
            _bn_undo(lp, prefix.mean(axis=(0, 2, 3))[selected], prefix.var(axis=(0, 2, 3))[selected])

    new_params = params.copy()
    new_params.layers.insert(g, lp)
    for m in range(g + 1, len(new_spec.layers)):
        if not new_spec.layers[m].parametric:
            continue
        layout = _segment_layout(new_spec, m, g, shapes_new)
        if layout is None:
            continue
        _, prefix, suffix = layout
        if prefix != f_in:
            raise AssertionError("inserted layer's input is not a prefix of its consumer's input")
        remap = insertion_remap(prefix, selected.tolist(), suffix)
        mp = new_params.layers[m]
        mp.weight = compensate_inputs(mp.weight, remap, _input_axis(new_spec, m),
                                      _flatten_factor(new_spec, m, shapes_new))
    return new_spec, new_params


def deepen_plain(spec: ArchitectureSpec, params: NetworkParams, action: Deepen,
                 rng: np.random.Generator | None = None, table: WidthTable = DEFAULT_TABLE,
                 calibration: np.ndarray | None = None):
    """Insert an identity conv/fc layer at a block position.

    With batch norm, scale and shift undo the normalization; the running
    statistics come from ``calibration`` (a batch of network inputs) when given.
    """
    check_valid(spec, table)
    check_params(spec, params)
    _check_filter_size(action.filter_size)
    ins = resolve_insertion(spec, action.block, action.index, action.filter_size, table)
    if ins is None:
        raise InvalidActionError(f"{action} is not a valid insertion for this architecture")
    if ins.dense:
        raise InvalidActionError(f"{action} lands inside a dense block; use deepen_dense")
    if ins.layer.kind is LayerKind.FC and action.filter_size is not None:
        raise InvalidActionError("fully-connected insertions carry no filter size")
    return _identity_insertion(spec, params, ins, calibration)


def deepen_dense(spec: ArchitectureSpec, params: NetworkParams, position: int, filter_size: int,
                 rng: np.random.Generator | None = None, table: WidthTable = DEFAULT_TABLE,
                 calibration: np.ndarray | None = None):
    """Insert a replicating layer into a dense block so it becomes member ``position``.

    Each new filter is a one-hot centre tap on a randomly chosen input channel;
    every later consumer's kernel absorbs the duplicated channels.
    """
    if not spec.dense:
        raise InvalidActionError("deepen_dense needs a dense architecture")
    check_valid(spec, table)
    check_params(spec, params)
    _check_filter_size(filter_size)
    if not any(s < position <= e for s, e in spec.dense_blocks):
        raise InvalidActionError(f"position {position} is not inside a dense block")
    blocks = split_blocks(spec, table)
    for blk in blocks:
        if blk.kind != "conv":
            continue
        for p in range(len(blk.layers) + 1):
            ins = resolve_insertion(spec, blk.index, p, filter_size, table, blocks)
            if ins is not None and ins.dense and ins.index == position:
                return _dense_insertion(spec, params, ins, rng or np.random.default_rng(),
                                        calibration)
    raise InvalidActionError(f"cannot insert a dense layer at {position}")


def deepen(spec: ArchitectureSpec, params: NetworkParams, action: Deepen,
           rng: np.random.Generator | None = None, table: WidthTable = DEFAULT_TABLE,
           calibration: np.ndarray | None = None):
    """Dispatch a deepen action to identity or dense insertion as its position requires."""
    check_valid(spec, table)
    check_params(spec, params)
    _check_filter_size(action.filter_size)
    ins = resolve_insertion(spec, action.block, action.index, action.filter_size, table)
    if ins is None:
        raise InvalidActionError(f"{action} is not a valid insertion for this architecture")
    if ins.layer.kind is LayerKind.FC and action.filter_size is not None:
        raise InvalidActionError("fully-connected insertions carry no filter size")
    if ins.dense:
        return _dense_insertion(spec, params, ins, rng or np.random.default_rng(), calibration)
    return _identity_insertion(spec, params, ins, calibration)


def apply_action(spec: ArchitectureSpec, params: NetworkParams, action: TransformAction,
                 rng: np.random.Generator | None = None, table: WidthTable = DEFAULT_TABLE,
                 calibration: np.ndarray | None = None):
    if isinstance(action, Widen):
        return widen(spec, params, action.layer, None, rng, table)
    return deepen(spec, params, action, rng, table, calibration)


def apply_actions(spec, params, actions, rng=None, table: WidthTable = DEFAULT_TABLE,
                  calibration=None):
    for action in actions:
        spec, params = apply_action(spec, params, action, rng, table, calibration)
    return spec, params
