"""Architecture representation for plain and densely connected CNNs.

An :class:`ArchitectureSpec` is a flat sequence of :class:`LayerSpec` plus a
connectivity mode. Batch norm, activation and dropout are attributes of the
parametric layers rather than separate nodes. The classifier is an ordinary
``softmax`` layer (a linear map to class logits) and global average pooling is
an ordinary ``pool`` layer.

Dense connectivity is described by half-open layer ranges ``(start, end)``.
The first member of a block consumes its predecessor as in a plain network;
every later member consumes the channel concatenation of all earlier members
of the block, and layer ``end`` (the first layer after the block) consumes the
concatenation of every member.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

ARCH_HEADER = "eas-arch v1"


class LayerKind(str, Enum):
    CONV = "conv"
    POOL = "pool"
    FC = "fc"
    SOFTMAX = "softmax"


class Connectivity(str, Enum):
    PLAIN = "plain"
    DENSE = "dense"


PARAMETRIC = (LayerKind.CONV, LayerKind.FC, LayerKind.SOFTMAX)
CONV_FILTER_SIZES = (1, 3, 5)


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    width: int | None = None
    filter_size: int | None = None
    stride: int | None = None
    pool_mode: str | None = None
    activation: str = "none"
    batchnorm: bool = False
    dropout: float = 0.0

    @property
    def parametric(self) -> bool:
        return self.kind in PARAMETRIC

    def replace(self, **changes) -> "LayerSpec":
        return dataclasses.replace(self, **changes)


def conv(width: int, k: int = 3, *, batchnorm: bool = True, activation: str = "relu",
         dropout: float = 0.0) -> LayerSpec:
    return LayerSpec(LayerKind.CONV, width=width, filter_size=k, stride=1,
                     activation=activation, batchnorm=batchnorm, dropout=dropout)


def pool(k: int = 2, stride: int | None = None, mode: str = "max") -> LayerSpec:
    return LayerSpec(LayerKind.POOL, filter_size=k, stride=k if stride is None else stride,
                     pool_mode=mode)


def fc(width: int, *, batchnorm: bool = True, activation: str = "relu",
       dropout: float = 0.0) -> LayerSpec:
    return LayerSpec(LayerKind.FC, width=width, activation=activation,
                     batchnorm=batchnorm, dropout=dropout)


def softmax(classes: int) -> LayerSpec:
    return LayerSpec(LayerKind.SOFTMAX, width=classes)


@dataclass(frozen=True)
class ArchitectureSpec:
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, int, int] = (3, 32, 32)
    connectivity: Connectivity = Connectivity.PLAIN
    dense_blocks: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "connectivity", Connectivity(self.connectivity))
        object.__setattr__(self, "dense_blocks",
                           tuple((int(s), int(e)) for s, e in self.dense_blocks))

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def dense(self) -> bool:
        return self.connectivity is Connectivity.DENSE

    @property
    def num_classes(self) -> int:
        return self.layers[-1].width

    def replace(self, **changes) -> "ArchitectureSpec":
        return dataclasses.replace(self, **changes)

    def with_layer(self, index: int, layer: LayerSpec) -> "ArchitectureSpec":
        layers = list(self.layers)
        layers[index] = layer
        return self.replace(layers=tuple(layers))

    def dense_block_of(self, index: int) -> tuple[int, int] | None:
        for s, e in self.dense_blocks:
            if s <= index < e:
                return (s, e)
        return None


@dataclass(frozen=True)
class WidthTable:
    conv_levels: tuple[int, ...] = (16, 32, 64, 96, 128, 192, 256, 320, 384, 448, 512)
    fc_levels: tuple[int, ...] = (64, 128, 256, 384, 512, 640, 768, 896, 1024)
    growth_levels: tuple[int, ...] = (40, 44, 48, 52, 56, 60, 64)

    def __post_init__(self):
        for name in ("conv_levels", "fc_levels", "growth_levels"):
            levels = tuple(int(v) for v in getattr(self, name))
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, levels)

    def levels(self, name: str) -> tuple[int, ...]:
        return {"conv": self.conv_levels, "fc": self.fc_levels,
                "growth": self.growth_levels}[name]


DEFAULT_TABLE = WidthTable()


def start_network(classes: int = 10, input_shape=(3, 32, 32)) -> ArchitectureSpec:
    """The small plain start-point network C16-P-C32-P-C64-P-C128-GAP-FC256-SM."""
    layers = [
        conv(16, 3), pool(2, 2, "max"),
        conv(32, 3), pool(2, 2, "max"),
        conv(64, 3), pool(2, 2, "max"),
        conv(128, 3), pool(4, 4, "avg"),
        fc(256), softmax(classes),
    ]
    return ArchitectureSpec(tuple(layers), input_shape=tuple(input_shape))


# ---------------------------------------------------------------------------
# topology


def sources(spec: ArchitectureSpec) -> list[list[int]]:
    """Per layer, the layers whose outputs are concatenated to form its input.

    ``-1`` denotes the network input.
    """
    srcs: list[list[int]] = [[i - 1] for i in range(len(spec.layers))]
    if spec.dense:
        for s, e in spec.dense_blocks:
            for i in range(s + 1, e):
                srcs[i] = list(range(s, i))
            if e < len(spec.layers):
                srcs[e] = list(range(s, e))
    return srcs


def expanded_sources(spec: ArchitectureSpec, index: int,
                     srcs: list[list[int]] | None = None) -> list[int]:
    """Sources of ``index`` with pooling layers expanded into their own inputs.

    The result lists the parametric producers (or ``-1``) in channel order.
    """
    srcs = sources(spec) if srcs is None else srcs
    out: list[int] = []

    def visit(i: int) -> None:
        if i >= 0 and spec.layers[i].kind is LayerKind.POOL:
            for j in srcs[i]:
                visit(j)
        else:
            out.append(i)

    for j in srcs[index]:
        visit(j)
    return out


@dataclass(frozen=True)
class LayerShapes:
    in_channels: int
    in_hw: tuple[int, int]
    out_channels: int
    out_hw: tuple[int, int]


def layer_shapes(spec: ArchitectureSpec) -> list[LayerShapes]:
    """Input and output shapes of every layer. Raises on spatial underflow."""
    srcs = sources(spec)
    c0, h0, w0 = spec.input_shape
    out_c: dict[int, int] = {-1: c0}
    out_hw: dict[int, tuple[int, int]] = {-1: (h0, w0)}
    shapes = []
    for i, layer in enumerate(spec.layers):
        cin = sum(out_c[j] for j in srcs[i])
        hw = out_hw[srcs[i][0]]
        if any(out_hw[j] != hw for j in srcs[i]):
            raise ValueError(f"layer {i}: concatenated inputs differ spatially")
        if layer.kind is LayerKind.POOL:
            k, s = layer.filter_size, layer.stride
            if hw[0] < k or hw[1] < k:
                raise ValueError(f"layer {i}: spatial-underflow")
            ohw = ((hw[0] - k) // s + 1, (hw[1] - k) // s + 1)
            oc = cin
        elif layer.kind is LayerKind.CONV:
            ohw, oc = hw, layer.width
        else:
            ohw, oc = (1, 1), layer.width
        out_c[i], out_hw[i] = oc, ohw
        shapes.append(LayerShapes(cin, hw, oc, ohw))
    return shapes


def parametric_indices(spec: ArchitectureSpec) -> list[int]:
    return [i for i, layer in enumerate(spec.layers) if layer.parametric]


def count_params(spec: ArchitectureSpec) -> int:
    total = 0
    for layer, sh in zip(spec.layers, layer_shapes(spec)):
        if layer.kind is LayerKind.CONV:
            total += layer.filter_size ** 2 * sh.in_channels * layer.width + layer.width
        elif layer.kind in (LayerKind.FC, LayerKind.SOFTMAX):
            total += sh.in_channels * sh.in_hw[0] * sh.in_hw[1] * layer.width + layer.width
        if layer.batchnorm:
            total += 2 * layer.width
    return total


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    code: str
    layer: int | None
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def add(self, code: str, layer: int | None, message: str) -> None:
        self.violations.append(Violation(code, layer, message))


def level_set(spec: ArchitectureSpec, index: int) -> str | None:
    """Name of the width-level sequence governing layer ``index``."""
    layer = spec.layers[index]
    if layer.kind is LayerKind.FC:
        return "fc"
    if layer.kind is LayerKind.CONV:
        block = spec.dense_block_of(index) if spec.dense else None
        if block is not None and index > block[0]:
            return "growth"
        return "conv"
    return None


def validate_architecture(spec: ArchitectureSpec,
                          table: WidthTable = DEFAULT_TABLE) -> ValidationReport:
    rep = ValidationReport()
    layers = spec.layers
    if not layers:
        rep.add("empty", None, "architecture has no layers")
        return rep
    if any(v <= 0 for v in spec.input_shape) or len(spec.input_shape) != 3:
        rep.add("bad-input-shape", None, f"input shape {spec.input_shape}")
        return rep

    n_softmax = sum(layer.kind is LayerKind.SOFTMAX for layer in layers)
    if n_softmax != 1 or layers[-1].kind is not LayerKind.SOFTMAX:
        rep.add("softmax-not-last", None, "exactly one softmax layer must end the network")

    seen_fc = False
    for i, layer in enumerate(layers):
        kind = layer.kind
        if kind is LayerKind.FC:
            seen_fc = True
        elif kind is LayerKind.CONV and seen_fc:
            rep.add("conv-after-fc", i, "convolution follows a fully-connected layer")
        elif kind is LayerKind.POOL and seen_fc:
            rep.add("pool-after-fc", i, "pooling follows a fully-connected layer")

        if layer.parametric:
            if layer.width is None or layer.width <= 0:
                rep.add("bad-width", i, "parametric layer needs a positive width")
            if layer.activation not in ("relu", "none"):
                rep.add("bad-activation", i, f"unknown activation {layer.activation!r}")
            if not 0.0 <= layer.dropout < 1.0:
                rep.add("bad-dropout", i, f"dropout {layer.dropout} outside [0, 1)")
        if kind is LayerKind.CONV:
            if layer.filter_size not in CONV_FILTER_SIZES:
                rep.add("conv-filter-size", i, f"filter size {layer.filter_size} not in {{1,3,5}}")
            if layer.stride not in (None, 1):
                rep.add("conv-stride", i, "convolution stride is fixed to 1")
        if kind is LayerKind.POOL:
            if not layer.filter_size or not layer.stride or layer.filter_size <= 0 or layer.stride <= 0:
                rep.add("bad-pool", i, "pool needs positive filter size and stride")
            if layer.pool_mode not in ("max", "avg"):
                rep.add("bad-pool", i, f"unknown pool mode {layer.pool_mode!r}")
        if kind is LayerKind.SOFTMAX and (layer.batchnorm or layer.activation != "none"):
            rep.add("bad-softmax", i, "softmax layer carries no batch norm or activation")

    if spec.dense:
        prev_end = -1
        for s, e in spec.dense_blocks:
            if not (0 <= s < e < len(layers)) or s < prev_end:
                rep.add("invalid-dense-block", s, f"block ({s}, {e}) out of range or overlapping")
                continue
            prev_end = e
            if any(layers[i].kind is not LayerKind.CONV for i in range(s, e)):
                rep.add("invalid-dense-block", s, f"block ({s}, {e}) has non-conv members")
    elif spec.dense_blocks:
        rep.add("invalid-dense-block", None, "plain architecture with dense blocks")

    if not rep.ok:
        return rep

    for i, layer in enumerate(layers):
        name = level_set(spec, i)
        if name is not None and layer.width not in table.levels(name):
            rep.add("width-not-in-table", i, f"width {layer.width} not a {name} level")

    try:
        layer_shapes(spec)
    except ValueError as exc:
        code = "spatial-underflow" if "underflow" in str(exc) else "shape-mismatch"
        rep.add(code, None, str(exc))
    return rep


def check_valid(spec: ArchitectureSpec, table: WidthTable = DEFAULT_TABLE) -> None:
    rep = validate_architecture(spec, table)
    if not rep.ok:
        raise ValueError("invalid architecture: " + "; ".join(
            f"{v.code}@{v.layer}: {v.message}" for v in rep.violations))


# ---------------------------------------------------------------------------
# blocks and widths


@dataclass(frozen=True)
class Block:
    index: int
    layers: tuple[int, ...]
    kind: str  # "conv" or "fc"


def split_blocks(spec: ArchitectureSpec, table: WidthTable = DEFAULT_TABLE) -> list[Block]:
    """Partition the non-pool layers into blocks bounded by pooling layers.

    Fully-connected and softmax layers always form the terminal block.
    """
    check_valid(spec, table)
    runs: list[tuple[list[int], str]] = []
    current: list[int] = []
    current_kind = "conv"
    for i, layer in enumerate(spec.layers):
        if layer.kind is LayerKind.POOL:
            if current:
                runs.append((current, current_kind))
            current = []
            continue
        kind = "conv" if layer.kind is LayerKind.CONV else "fc"
        if kind != current_kind and current:
            runs.append((current, current_kind))
            current = []
        current_kind = kind
        current.append(i)
    if current:
        runs.append((current, current_kind))
    return [Block(b, tuple(idx), kind) for b, (idx, kind) in enumerate(runs)]


def next_width_level(current: int, kind: str, table: WidthTable = DEFAULT_TABLE) -> int | None:
    """Successor of ``current`` in the ``kind`` level sequence, ``None`` if saturated."""
    kind = kind.value if isinstance(kind, LayerKind) else kind
    levels = table.levels(kind)
    if current not in levels:
        raise ValueError(f"{current} is not a {kind} width level")
    pos = levels.index(current)
    return levels[pos + 1] if pos + 1 < len(levels) else None


def widenable(spec: ArchitectureSpec, index: int, table: WidthTable = DEFAULT_TABLE) -> bool:
    """True when layer ``index`` is a conv/fc layer below its maximum width level."""
    layer = spec.layers[index]
    if layer.kind not in (LayerKind.CONV, LayerKind.FC):
        return False
    return next_width_level(layer.width, level_set(spec, index), table) is not None


def widen_spec(spec: ArchitectureSpec, index: int, new_width: int) -> ArchitectureSpec:
    return spec.with_layer(index, spec.layers[index].replace(width=int(new_width)))


# ---------------------------------------------------------------------------
# insertion points


def _nonnegative_outputs(spec: ArchitectureSpec) -> list[bool]:
    """Whether each layer's output is provably non-negative (ReLU, or pools thereof)."""
    srcs = sources(spec)
    out = []
    for i, layer in enumerate(spec.layers):
        if layer.kind is LayerKind.POOL:
            out.append(all(j >= 0 and out[j] for j in srcs[i]))
        else:
            out.append(layer.parametric and layer.activation == "relu")
    return out


def _nearest_parametric_below(spec: ArchitectureSpec, g: int) -> int | None:
    i = g - 1
    while i >= 0 and spec.layers[i].kind is LayerKind.POOL:
        i -= 1
    return i if i >= 0 else None


@dataclass(frozen=True)
class Insertion:
    """A resolved deepen position: the new layer will occupy ``index``."""
    index: int
    layer: LayerSpec
    dense: bool


def resolve_insertion(spec: ArchitectureSpec, block: int, position: int,
                      filter_size: int | None = None, table: WidthTable = DEFAULT_TABLE,
                      blocks: list[Block] | None = None) -> Insertion | None:
    """Resolve (block, position) into an insertion, or ``None`` if it is not allowed.

    ``position`` ranges over ``0..len(block)`` for conv blocks (before each
    member, or after the last) and over ``0..len(block)-1`` for the terminal
    fc block (the softmax layer always stays last).
    """
    blocks = split_blocks(spec, table) if blocks is None else blocks
    if not 0 <= block < len(blocks):
        return None
    blk = blocks[block]
    members = blk.layers
    limit = len(members) if blk.kind == "conv" else len(members) - 1
    if not 0 <= position <= limit:
        return None
    g = members[position] if position < len(members) else members[-1] + 1
    if g == 0:
        return None
    nonneg = _nonnegative_outputs(spec)
    srcs = sources(spec)
    below = _nearest_parametric_below(spec, g)
    if below is None:
        return None
    template = spec.layers[below]

    if blk.kind == "conv":
        if filter_size not in CONV_FILTER_SIZES:
            return None
        dense_block = None
        if spec.dense:
            for s, e in spec.dense_blocks:
                if s < g <= e:
                    dense_block = (s, e)
        if dense_block is not None:
            s, e = dense_block
            if not nonneg[s]:
                return None
            member = spec.layers[g - 1] if g - 1 > s else spec.layers[s + 1] if e - s > 1 else None
            width = member.width if member is not None else table.growth_levels[0]
            new = conv(width, filter_size, batchnorm=template.batchnorm,
                       activation="relu", dropout=template.dropout)
            return Insertion(g, new, True)
        if not nonneg[g - 1] or template.activation != "relu":
            return None
        # outside dense blocks the layer at g always consumes g-1 alone
        assert srcs[g] == [g - 1]
        in_channels = layer_shapes(spec)[g].in_channels
        if in_channels not in table.conv_levels:
            return None
        new = conv(in_channels, filter_size, batchnorm=template.batchnorm,
                   activation="relu", dropout=template.dropout)
        return Insertion(g, new, False)

    # fully-connected block
    if not nonneg[g - 1] or template.activation != "relu":
        return None
    sh = layer_shapes(spec)[g]
    features = sh.in_channels * sh.in_hw[0] * sh.in_hw[1]
    if features not in table.fc_levels:
        return None
    new = fc(features, batchnorm=template.batchnorm, activation="relu",
             dropout=template.dropout)
    return Insertion(g, new, False)


def valid_insertions(spec: ArchitectureSpec, table: WidthTable = DEFAULT_TABLE,
                     filter_size: int = 3) -> list[list[int]]:
    """Per block, the positions at which a layer may be inserted."""
    blocks = split_blocks(spec, table)
    out = []
    for blk in blocks:
        limit = len(blk.layers) if blk.kind == "conv" else len(blk.layers) - 1
        out.append([p for p in range(limit + 1)
                    if resolve_insertion(spec, blk.index, p, filter_size, table, blocks) is not None])
    return out


def insert_layer(spec: ArchitectureSpec, ins: Insertion) -> ArchitectureSpec:
    g = ins.index
    layers = spec.layers[:g] + (ins.layer,) + spec.layers[g:]
    blocks = []
    for s, e in spec.dense_blocks:
        if ins.dense and s < g <= e:
            blocks.append((s, e + 1))
        elif g <= s:
            blocks.append((s + 1, e + 1))
        else:
            blocks.append((s, e))
    return spec.replace(layers=layers, dense_blocks=tuple(blocks))


# ---------------------------------------------------------------------------
# serialization


_TOKEN = re.compile(r"^([a-z_]+)=(\S+)$")


class ArchParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _format_layer(layer: LayerSpec) -> str:
    parts = [f"layer {layer.kind.value}"]
    if layer.kind is LayerKind.POOL:
        parts += [f"k={layer.filter_size}", f"stride={layer.stride}", f"mode={layer.pool_mode}"]
        return " ".join(parts)
    parts.append(f"width={layer.width}")
    if layer.kind is LayerKind.CONV:
        parts.append(f"k={layer.filter_size}")
    parts += [f"act={layer.activation}", f"bn={int(layer.batchnorm)}",
              f"dropout={layer.dropout!r}"]
    return " ".join(parts)


def serialize(spec: ArchitectureSpec) -> str:
    lines = [ARCH_HEADER,
             "input {} {} {}".format(*spec.input_shape),
             f"connectivity {spec.connectivity.value}"]
    for s, e in spec.dense_blocks:
        lines.append(f"dense_block {s} {e}")
    lines += [_format_layer(layer) for layer in spec.layers]
    return "\n".join(lines) + "\n"


def _parse_int(value: str, line: int, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ArchParseError(line, f"{what} must be an integer, got {value!r}") from None


def _parse_layer(tokens: list[str], line: int) -> LayerSpec:
    if not tokens:
        raise ArchParseError(line, "missing layer kind")
    try:
        kind = LayerKind(tokens[0])
    except ValueError:
        raise ArchParseError(line, f"unknown layer kind {tokens[0]!r}") from None
    fields: dict[str, str] = {}
    for tok in tokens[1:]:
        m = _TOKEN.match(tok)
        if not m:
            raise ArchParseError(line, f"malformed field {tok!r}")
        fields[m.group(1)] = m.group(2)

    allowed = {
        LayerKind.POOL: {"k", "stride", "mode"},
        LayerKind.CONV: {"width", "k", "act", "bn", "dropout"},
        LayerKind.FC: {"width", "act", "bn", "dropout"},
        LayerKind.SOFTMAX: {"width", "act", "bn", "dropout"},
    }[kind]
    unknown = set(fields) - allowed
    if unknown:
        raise ArchParseError(line, f"unknown field(s) {sorted(unknown)} for {kind.value}")
    missing = {"k", "stride", "mode"} - set(fields) if kind is LayerKind.POOL else {"width"} - set(fields)
    if kind is LayerKind.CONV and "k" not in fields:
        missing = missing | {"k"}
    if missing:
        raise ArchParseError(line, f"missing field(s) {sorted(missing)}")

    if kind is LayerKind.POOL:
        return LayerSpec(kind, filter_size=_parse_int(fields["k"], line, "k"),
                         stride=_parse_int(fields["stride"], line, "stride"),
                         pool_mode=fields["mode"])
    try:
        dropout = float(fields.get("dropout", "0.0"))
    except ValueError:
        raise ArchParseError(line, f"bad dropout {fields['dropout']!r}") from None
    if fields.get("bn", "0") not in ("0", "1"):
        raise ArchParseError(line, "bn must be 0 or 1")
    default_act = "none" if kind is LayerKind.SOFTMAX else "relu"
    return LayerSpec(
        kind,
        width=_parse_int(fields["width"], line, "width"),
        filter_size=_parse_int(fields["k"], line, "k") if kind is LayerKind.CONV else None,
        stride=1 if kind is LayerKind.CONV else None,
        activation=fields.get("act", default_act),
        batchnorm=fields.get("bn", "0") == "1",
        dropout=dropout,
    )


def deserialize(text: str) -> ArchitectureSpec:
    lines = text.splitlines()
    if not lines or lines[0].strip() != ARCH_HEADER:
        raise ArchParseError(1, f"expected header {ARCH_HEADER!r}")
    input_shape = None
    connectivity = Connectivity.PLAIN
    blocks: list[tuple[int, int]] = []
    layers: list[LayerSpec] = []
    for n, raw in enumerate(lines[1:], start=2):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        head, *rest = content.split()
        if head == "input":
            if len(rest) != 3:
                raise ArchParseError(n, "input needs three integers")
            input_shape = tuple(_parse_int(v, n, "input") for v in rest)
        elif head == "connectivity":
            try:
                connectivity = Connectivity(rest[0] if rest else "")
            except ValueError:
                raise ArchParseError(n, f"unknown connectivity {rest!r}") from None
        elif head == "dense_block":
            if len(rest) != 2:
                raise ArchParseError(n, "dense_block needs start and end")
            blocks.append((_parse_int(rest[0], n, "start"), _parse_int(rest[1], n, "end")))
        elif head == "layer":
            layers.append(_parse_layer(rest, n))
        else:
            raise ArchParseError(n, f"unknown directive {head!r}")
    if input_shape is None:
        raise ArchParseError(len(lines), "missing input directive")
    return ArchitectureSpec(tuple(layers), input_shape=input_shape,
                            connectivity=connectivity, dense_blocks=tuple(blocks))


def describe(spec: ArchitectureSpec) -> str:
    """Compact one-line rendering, e.g. ``C16-P-C32-FC256-SM10``."""
    parts = []
    for layer in spec.layers:
        if layer.kind is LayerKind.CONV:
            parts.append(f"C{layer.width}" + ("" if layer.filter_size == 3 else f"k{layer.filter_size}"))
        elif layer.kind is LayerKind.POOL:
            parts.append("P" if layer.pool_mode == "max" else "A")
        elif layer.kind is LayerKind.FC:
            parts.append(f"FC{layer.width}")
        else:
            parts.append(f"SM{layer.width}")
    return "-".join(parts)


def iter_layers(spec: ArchitectureSpec, kinds: Iterable[LayerKind]) -> Sequence[int]:
    kinds = tuple(kinds)
    return [i for i, layer in enumerate(spec.layers) if layer.kind in kinds]
