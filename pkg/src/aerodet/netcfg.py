"""Darknet-style network config parsing and static tensor-shape propagation.

The supported dialect covers the layers a YOLOv2-family detector uses:
``[net]``, ``[convolutional]``, ``[maxpool]``, ``[route]``, ``[reorg]``
and ``[region]``. Shapes are propagated without touching any weights, so
architecture variants (input resolution, depth, aspect ratio) can be
checked statically.

Shape rules:
  - convolutional: same-padded, stride 1 only; spatial dims preserved,
    channels become ``filters``
  - maxpool stride s: spatial dims floor-divide by s, channels unchanged
  - reorg stride s: spatial dims divide by s (must be exact), channels
    multiply by s^2
  - route: channel-axis concatenation of earlier layers; spatial dims of
    all sources must agree
  - region: pass-through head marker carrying anchor/class counts
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

logger = logging.getLogger(__name__)


class CfgError(ValueError):
    """Raised for malformed config text or inconsistent layer wiring."""


class ShapeError(ValueError):
    """Raised when shape propagation hits an impossible configuration."""


class LayerKind(str, Enum):
    INPUT = "input"
    CONVOLUTIONAL = "convolutional"
    MAXPOOL = "maxpool"
    ROUTE = "route"
    REORG = "reorg"
    REGION = "region"


@dataclass(frozen=True)
class TensorShape:
    """Feature-map extent as (width, height, channels), all positive."""

    width: int
    height: int
    channels: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.channels <= 0:
            raise ValueError(f"tensor dims must be positive, got {self}")

    def __str__(self):
        return f"{self.width} x {self.height} x {self.channels}"


@dataclass(frozen=True)
class RegionParams:
    num_anchors: int
    classes: int
    coords: int = 4
    anchors: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class LayerSpec:
    """One parsed layer. Fields not applicable to ``kind`` stay None.

    ``route_sources`` holds absolute indices into the owning net's layer
    list (index 0 is the input entry); negative indices in the config are
    resolved at parse time.
    """

    kind: LayerKind
    filters: Optional[int] = None
    kernel: Optional[int] = None
    stride: Optional[int] = None
    route_sources: Optional[tuple[int, ...]] = None
    region_params: Optional[RegionParams] = None


@dataclass(frozen=True)
class NetConfig:
    """Parsed network: input shape plus the ordered layer list.

    ``layers[0]`` is always the input pseudo-layer; a region layer, when
    present, is unique and last.
    """

    input_shape: TensorShape
    layers: tuple[LayerSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.layers or self.layers[0].kind is not LayerKind.INPUT:
            raise CfgError("first layer entry must be the input")
        region_positions = [i for i, l in enumerate(self.layers) if l.kind is LayerKind.REGION]
        if len(region_positions) > 1:
            raise CfgError("at most one region layer is allowed")
        if region_positions and region_positions[0] != len(self.layers) - 1:
            raise CfgError("region layer must be last")

    def with_input_size(self, width: int, height: int) -> "NetConfig":
        """Same topology at a different input resolution."""
        shape = TensorShape(width, height, self.input_shape.channels)
        return replace(self, input_shape=shape)

    @property
    def region(self) -> Optional[RegionParams]:
        last = self.layers[-1]
        return last.region_params if last.kind is LayerKind.REGION else None


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning" | "info"
    message: str

    def __str__(self):
        return f"{self.severity}: {self.message}"


_KNOWN_KEYS = {
    "net": {"width", "height", "channels"},
    "convolutional": {"filters", "size", "stride"},
    "maxpool": {"size", "stride"},
    "route": {"layers"},
    "reorg": {"stride"},
    "region": {"num", "classes", "coords", "anchors"},
}


def _split_sections(text: str):
    """Yield (section_name, {key: value}, line_number) in file order."""
    name, options, start_line = None, {}, 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise CfgError(f"line {lineno}: malformed section header {raw.strip()!r}")
            if name is not None:
                yield name, options, start_line
            name, options, start_line = line[1:-1].strip().lower(), {}, lineno
        else:
            if name is None:
                raise CfgError(f"line {lineno}: key outside any section")
            if "=" not in line:
                raise CfgError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key or not value:
                raise CfgError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
            options[key.lower()] = value
    if name is not None:
        yield name, options, start_line


def _get_int(options, key, section, lineno, default=None, minimum=1):
    if key not in options:
        if default is None:
            raise CfgError(f"line {lineno}: [{section}] requires {key}")
        return default
    try:
        value = int(options[key])
    except ValueError:
        raise CfgError(f"line {lineno}: [{section}] {key}={options[key]!r} is not an integer") from None
    if value < minimum:
        raise CfgError(f"line {lineno}: [{section}] {key} must be >= {minimum}, got {value}")
    return value


def _warn_unknown_keys(section, options, lineno):
    for key in sorted(set(options) - _KNOWN_KEYS[section]):
        logger.warning("line %d: ignoring unknown key %r in [%s]", lineno, key, section)


def _parse_anchor_pairs(text: str, lineno: int) -> tuple[tuple[float, float], ...]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CfgError(f"line {lineno}: anchors must be comma-separated numbers") from None
    if len(values) % 2:
        raise CfgError(f"line {lineno}: anchors need an even number of values")
    return tuple((values[i], values[i + 1]) for i in range(0, len(values), 2))


def parse_cfg(text: str) -> NetConfig:
    """Parse config text into a NetConfig.

    The first section must be ``[net]`` with at least width and height
    (channels defaults to 3). Unknown keys inside known sections are
    ignored with a warning; unknown sections are errors. Route ``layers``
    values may be absolute layer indices or negative offsets relative to
    the route's own position, and are stored resolved.
    """
    sections = list(_split_sections(text))
    if not sections:
        raise CfgError("empty configuration")
    name, options, lineno = sections[0]
    if name != "net":
        raise CfgError(f"line {lineno}: configuration must start with [net], got [{name}]")
    _warn_unknown_keys("net", options, lineno)
    if "width" not in options or "height" not in options:
        raise CfgError(f"line {lineno}: [net] requires width and height")
    input_shape = TensorShape(
        width=_get_int(options, "width", "net", lineno),
        height=_get_int(options, "height", "net", lineno),
        channels=_get_int(options, "channels", "net", lineno, default=3),
    )

    layers = [LayerSpec(kind=LayerKind.INPUT)]
    for name, options, lineno in sections[1:]:
        if name not in _KNOWN_KEYS or name == "net":
            raise CfgError(f"line {lineno}: unknown section [{name}]")
        _warn_unknown_keys(name, options, lineno)
        position = len(layers)
        if name == "convolutional":
            layers.append(
                LayerSpec(
                    kind=LayerKind.CONVOLUTIONAL,
                    filters=_get_int(options, "filters", name, lineno),
                    kernel=_get_int(options, "size", name, lineno, default=1),
                    stride=_get_int(options, "stride", name, lineno, default=1),
                )
            )
        elif name == "maxpool":
            size = _get_int(options, "size", name, lineno, default=2)
            layers.append(
                LayerSpec(
                    kind=LayerKind.MAXPOOL,
                    kernel=size,
                    stride=_get_int(options, "stride", name, lineno, default=size),
                )
            )
        elif name == "reorg":
            layers.append(
                LayerSpec(kind=LayerKind.REORG, stride=_get_int(options, "stride", name, lineno))
            )
        elif name == "route":
            if "layers" not in options:
                raise CfgError(f"line {lineno}: [route] requires layers")
            sources = []
            for token in options["layers"].split(","):
                try:
                    index = int(token)
                except ValueError:
                    raise CfgError(
                        f"line {lineno}: route layer index {token.strip()!r} is not an integer"
                    ) from None
                resolved = position + index if index < 0 else index
                if not (0 <= resolved < position):
                    raise CfgError(
                        f"line {lineno}: route source {token.strip()} resolves to layer "
                        f"{resolved}, outside the earlier range [0, {position})"
                    )
                sources.append(resolved)
            if not sources:
                raise CfgError(f"line {lineno}: [route] needs at least one source")
            layers.append(LayerSpec(kind=LayerKind.ROUTE, route_sources=tuple(sources)))
        elif name == "region":
            params = RegionParams(
                num_anchors=_get_int(options, "num", name, lineno, default=5),
                classes=_get_int(options, "classes", name, lineno, default=1),
                coords=_get_int(options, "coords", name, lineno, default=4),
                anchors=_parse_anchor_pairs(options["anchors"], lineno)
                if "anchors" in options
                else (),
            )
            layers.append(LayerSpec(kind=LayerKind.REGION, region_params=params))

    return NetConfig(input_shape=input_shape, layers=tuple(layers))


def serialize_cfg(net: NetConfig) -> str:
    """Render a NetConfig back to config text.

    Route sources are written as absolute indices, so
    ``parse_cfg(serialize_cfg(net)) == net``.
    """
    lines = [
        "[net]",
        f"width={net.input_shape.width}",
        f"height={net.input_shape.height}",
        f"channels={net.input_shape.channels}",
    ]
    for layer in net.layers[1:]:
        lines.append("")
        if layer.kind is LayerKind.CONVOLUTIONAL:
            lines += [
                "[convolutional]",
                f"filters={layer.filters}",
                f"size={layer.kernel}",
                f"stride={layer.stride}",
            ]
        elif layer.kind is LayerKind.MAXPOOL:
            lines += ["[maxpool]", f"size={layer.kernel}", f"stride={layer.stride}"]
        elif layer.kind is LayerKind.REORG:
            lines += ["[reorg]", f"stride={layer.stride}"]
        elif layer.kind is LayerKind.ROUTE:
            lines += ["[route]", "layers=" + ",".join(str(s) for s in layer.route_sources)]
        elif layer.kind is LayerKind.REGION:
            params = layer.region_params
            lines += [
                "[region]",
                f"num={params.num_anchors}",
                f"classes={params.classes}",
                f"coords={params.coords}",
            ]
            if params.anchors:
                flat = ",".join(f"{v}" for pair in params.anchors for v in pair)
                lines.append(f"anchors={flat}")
    return "\n".join(lines) + "\n"


def propagate_shapes(net: NetConfig) -> list[TensorShape]:
    """Statically compute the output shape of every layer entry.

    Returns one TensorShape per entry of ``net.layers`` (the first is the
    input shape itself, the region entry passes its input through).
    """
    shapes: list[TensorShape] = []
    for i, layer in enumerate(net.layers):
        if layer.kind is LayerKind.INPUT:
            shapes.append(net.input_shape)
            continue
        prev = shapes[i - 1]
        if layer.kind is LayerKind.CONVOLUTIONAL:
            if layer.stride != 1:
                raise ShapeError(
                    f"layer {i}: only stride-1 (same-padded) convolutions are modeled, "
                    f"got stride {layer.stride}"
                )
            shapes.append(TensorShape(prev.width, prev.height, layer.filters))
        elif layer.kind is LayerKind.MAXPOOL:
            w, h = prev.width // layer.stride, prev.height // layer.stride
            if w == 0 or h == 0:
                raise ShapeError(f"layer {i}: maxpool reduces spatial dims to zero")
            shapes.append(TensorShape(w, h, prev.channels))
        elif layer.kind is LayerKind.REORG:
            s = layer.stride
            if prev.width % s or prev.height % s:
                raise ShapeError(
                    f"layer {i}: reorg stride {s} does not divide {prev.width}x{prev.height}"
                )
            shapes.append(TensorShape(prev.width // s, prev.height // s, prev.channels * s * s))
        elif layer.kind is LayerKind.ROUTE:
            sources = [shapes[s] for s in layer.route_sources]
            first = sources[0]
            for src in sources[1:]:
                if (src.width, src.height) != (first.width, first.height):
                    raise ShapeError(
                        f"layer {i}: route sources have mismatched spatial dims "
                        f"{first.width}x{first.height} vs {src.width}x{src.height}"
                    )
            shapes.append(TensorShape(first.width, first.height, sum(s.channels for s in sources)))
        elif layer.kind is LayerKind.REGION:
            shapes.append(prev)
    return shapes


def required_head_filters(num_anchors: int, classes: int, coords: int) -> int:
    """Filter count the detection head must have for the region params.

    Each anchor predicts the box coordinates, one objectness score, and
    one score per class, so the head needs
    ``num_anchors * (classes + coords + 1)`` output channels.
    """
    if num_anchors < 1 or classes < 1 or coords < 1:
        raise ValueError("num_anchors, classes and coords must all be >= 1")
    return num_anchors * (classes + coords + 1)


def total_stride(net: NetConfig) -> int:
    """Cumulative trunk downsampling factor (product of maxpool strides)."""
    factor = 1
    for layer in net.layers:
        if layer.kind is LayerKind.MAXPOOL:
            factor *= layer.stride
    return factor


def validate_net(net: NetConfig) -> list[Diagnostic]:
    """Lint a parsed net; diagnostics are data, nothing is raised.

    Emits an error when the last convolution's filter count disagrees with
    the region parameters, a warning when the input resolution is not
    divisible by the net's total stride, and an info line summarizing
    depth and stride.
    """
    diagnostics = []
    factor = total_stride(net)
    depth = sum(1 for l in net.layers if l.kind is LayerKind.MAXPOOL)

    region = net.region
    if region is not None:
        last_conv = next(
            (l for l in reversed(net.layers) if l.kind is LayerKind.CONVOLUTIONAL), None
        )
        if last_conv is not None:
            required = required_head_filters(region.num_anchors, region.classes, region.coords)
            if last_conv.filters != required:
                diagnostics.append(
                    Diagnostic(
                        "error",
                        f"head conv has {last_conv.filters} filters but region params "
                        f"(num={region.num_anchors}, classes={region.classes}, "
                        f"coords={region.coords}) require {required}",
                    )
                )
        if region.anchors and len(region.anchors) != region.num_anchors:
            diagnostics.append(
                Diagnostic(
                    "error",
                    f"region lists {len(region.anchors)} anchor pairs but num={region.num_anchors}",
                )
            )

    if net.input_shape.width % factor or net.input_shape.height % factor:
        diagnostics.append(
            Diagnostic(
                "warning",
                f"input {net.input_shape.width}x{net.input_shape.height} is not divisible "
                f"by the total stride {factor}; downsampling will truncate",
            )
        )

    diagnostics.append(
        Diagnostic("info", f"net depth: {depth} maxpool stages, total stride {factor}")
    )
    return diagnostics
