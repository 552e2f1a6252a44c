"""Deterministic synthetic PDN generator.

Layers are alternating-direction stripe grids; vias sit at every crossing
of consecutive configured layers; pads go on the top layer and sinks on
layer-1 nodes that can actually reach a pad. Setting `irregularity` drops a
fraction of the stripes on every layer below the top, which removes their
vias and may leave unanchored stubs — mirroring irregular industrial grids
while keeping every sink supplied.

Generation is a pure function of the config: one seed, one netlist,
byte-identical after serialization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .netlist import (
    Axis,
    CurrentSource,
    NodeId,
    PdnGraph,
    ResistorEdge,
    VoltageSource,
    connected_to_pads,
)

PAD_RULES = ("grid", "stripe_ends")
SINK_DISTRIBUTIONS = ("uniform", "clustered")


class GenConfigError(ValueError):
    pass


class GenError(RuntimeError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    index: int
    axis: Axis
    pitch: float              # microns between stripes
    sheet_resistance: float   # ohms per micron of wire

    def __post_init__(self):
        if not isinstance(self.axis, Axis):
            axis = _AXIS_TOKENS.get(str(self.axis).strip().lower())
            if axis is None:
                raise GenConfigError(f"unknown axis {self.axis!r}")
            object.__setattr__(self, "axis", axis)


@dataclass(frozen=True)
class GenConfig:
    chip_width: float
    chip_height: float
    layers: tuple[LayerSpec, ...]
    via_resistance: float = 0.5
    vdd: float = 1.1
    pad_rule: str = "grid"
    pad_count: int = 4
    sink_count: int = 16
    sink_current_min: float = 1e-4
    sink_current_max: float = 1e-3
    sink_distribution: str = "uniform"
    irregularity: float = 0.0
    seed: int = 0
    dbu_per_micron: int = 2000
    node_pitch: float | None = None  # sample spacing for single-layer grids

    def __post_init__(self):
        if self.chip_width <= 0 or self.chip_height <= 0:
            raise GenConfigError("chip dimensions must be positive")
        if not self.layers:
            raise GenConfigError("at least one layer is required")
        indices = [l.index for l in self.layers]
        if indices != sorted(set(indices)) or indices[0] < 1:
            raise GenConfigError("layer indices must be unique, ascending, >= 1")
        for spec in self.layers:
            if spec.pitch <= 0:
                raise GenConfigError(f"layer {spec.index}: pitch must be positive")
            if spec.sheet_resistance <= 0:
                raise GenConfigError(
                    f"layer {spec.index}: sheet resistance must be positive"
                )
        for lower, upper in zip(self.layers, self.layers[1:]):
            if lower.axis is upper.axis:
                raise GenConfigError(
                    f"consecutive layers {lower.index} and {upper.index} must "
                    f"alternate direction"
                )
        if self.via_resistance <= 0:
            raise GenConfigError("via resistance must be positive")
        if self.vdd <= 0:
            raise GenConfigError("vdd must be positive")
        if self.pad_rule not in PAD_RULES:
            raise GenConfigError(f"pad rule must be one of {PAD_RULES}")
        if self.pad_count < 1:
            raise GenConfigError("pad count must be >= 1")
        if self.sink_count < 1:
            raise GenConfigError("at least one sink is required")
        if not 0 < self.sink_current_min <= self.sink_current_max:
            raise GenConfigError("sink currents must satisfy 0 < min <= max")
        if self.sink_distribution not in SINK_DISTRIBUTIONS:
            raise GenConfigError(
                f"sink distribution must be one of {SINK_DISTRIBUTIONS}"
            )
        if not 0 <= self.irregularity < 1:
            raise GenConfigError("irregularity must be in [0, 1)")
        if self.dbu_per_micron < 1:
            raise GenConfigError("dbu_per_micron must be >= 1")
        if self.node_pitch is not None and self.node_pitch <= 0:
            raise GenConfigError("node pitch must be positive")


_AXIS_TOKENS = {
    "h": Axis.HORIZONTAL,
    "horizontal": Axis.HORIZONTAL,
    "v": Axis.VERTICAL,
    "vertical": Axis.VERTICAL,
}


def parse_gen_config(text: str) -> GenConfig:
    """Parse UTF-8 key=value lines; '#' starts a comment.

    The `layers` value is `index:axis:pitch:sheet_resistance` entries
    joined by ';', e.g. `1:horizontal:4:0.05;2:vertical:4:0.04`.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GenConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in raw:
            raise GenConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    def pop(key: str, default=None) -> str | None:
        return raw.pop(key, default)

    try:
        layers_text = pop("layers")
        if layers_text is None:
            raise GenConfigError("missing required key 'layers'")
        layer_specs = []
        for entry in layers_text.split(";"):
            parts = entry.strip().split(":")
            if len(parts) != 4:
                raise GenConfigError(
                    f"layer entry {entry!r} must be index:axis:pitch:sheet_resistance"
                )
            axis = _AXIS_TOKENS.get(parts[1].strip().lower())
            if axis is None:
                raise GenConfigError(f"unknown axis {parts[1]!r}")
            layer_specs.append(
                LayerSpec(int(parts[0]), axis, float(parts[2]), float(parts[3]))
            )
        kwargs = dict(
            chip_width=float(pop("chip_width", "100")),
            chip_height=float(pop("chip_height", "100")),
            layers=tuple(layer_specs),
            via_resistance=float(pop("via_resistance", "0.5")),
            vdd=float(pop("vdd", "1.1")),
            pad_rule=str(pop("pad_rule", "grid")),
            pad_count=int(pop("pad_count", "4")),
            sink_count=int(pop("sink_count", "16")),
            sink_current_min=float(pop("sink_current_min", "1e-4")),
            sink_current_max=float(pop("sink_current_max", "1e-3")),
            sink_distribution=str(pop("sink_distribution", "uniform")),
            irregularity=float(pop("irregularity", "0")),
            seed=int(pop("seed", "0")),
            dbu_per_micron=int(pop("dbu_per_micron", "2000")),
        )
        node_pitch = pop("node_pitch")
        if node_pitch is not None:
            kwargs["node_pitch"] = float(node_pitch)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, GenConfigError):
            raise
        raise GenConfigError(f"bad config value: {exc}") from None
    if raw:
        raise GenConfigError(f"unknown config keys: {sorted(raw)}")
    return GenConfig(**kwargs)


def _stripe_positions(pitch: float, span: float) -> list[float]:
    positions = []
    pos = pitch / 2.0
    while pos < span:
        positions.append(pos)
        pos += pitch
    return positions


@dataclass
class _Plan:
    """Surviving stripe positions (DBU) per layer."""

    positions: dict[int, list[int]] = field(default_factory=dict)


def _survivors(cfg: GenConfig, rng: np.random.Generator) -> _Plan:
    plan = _Plan()
    top_index = cfg.layers[-1].index
    for spec in cfg.layers:
        span = cfg.chip_height if spec.axis is Axis.HORIZONTAL else cfg.chip_width
        um = _stripe_positions(spec.pitch, span)
        if not um:
            raise GenConfigError(
                f"layer {spec.index}: pitch {spec.pitch} leaves no stripe "
                f"within the chip"
            )
        dbu = [round(p * cfg.dbu_per_micron) for p in um]
        if cfg.irregularity > 0 and spec.index != top_index:
            n_drop = min(round(cfg.irregularity * len(dbu)), len(dbu) - 1)
            if n_drop > 0:
                dropped = set(rng.choice(len(dbu), size=n_drop, replace=False).tolist())
                dbu = [p for i, p in enumerate(dbu) if i not in dropped]
        plan.positions[spec.index] = dbu
    return plan


def generate(cfg: GenConfig) -> PdnGraph:
    """Build the synthetic grid; deterministic in cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    plan = _survivors(cfg, rng)
    by_index = {spec.index: spec for spec in cfg.layers}

    # Node coordinates per layer; a node is a crossing with a neighbor layer.
    node_coords: dict[int, set[tuple[int, int]]] = {
        spec.index: set() for spec in cfg.layers
    }
    via_edges: list[ResistorEdge] = []
    for lower, upper in zip(cfg.layers, cfg.layers[1:]):
        h_spec, v_spec = (
            (lower, upper) if lower.axis is Axis.HORIZONTAL else (upper, lower)
        )
        for y in plan.positions[h_spec.index]:
            for x in plan.positions[v_spec.index]:
                node_coords[lower.index].add((x, y))
                node_coords[upper.index].add((x, y))
                via_edges.append(
                    ResistorEdge.between(
                        NodeId(1, lower.index, x, y),
                        NodeId(1, upper.index, x, y),
                        cfg.via_resistance,
                    )
                )

    if len(cfg.layers) == 1:
        only = cfg.layers[0]
        sample_pitch = cfg.node_pitch or only.pitch
        span = cfg.chip_width if only.axis is Axis.HORIZONTAL else cfg.chip_height
        samples = [
            round(p * cfg.dbu_per_micron) for p in _stripe_positions(sample_pitch, span)
        ]
        if len(samples) < 2:
            raise GenConfigError(
                "single-layer grid needs a node pitch that yields >= 2 nodes per stripe"
            )
        for fixed in plan.positions[only.index]:
            for s in samples:
                coord = (s, fixed) if only.axis is Axis.HORIZONTAL else (fixed, s)
                node_coords[only.index].add(coord)

    wire_edges: list[ResistorEdge] = []
    for spec in cfg.layers:
        along_x = spec.axis is Axis.HORIZONTAL
        lanes: dict[int, list[tuple[int, int]]] = {}
        for x, y in node_coords[spec.index]:
            lanes.setdefault(y if along_x else x, []).append((x, y))
        for fixed in sorted(lanes):
            coords = sorted(lanes[fixed])
            for (x0, y0), (x1, y1) in zip(coords, coords[1:]):
                length_um = (abs(x1 - x0) + abs(y1 - y0)) / cfg.dbu_per_micron
                wire_edges.append(
                    ResistorEdge.between(
                        NodeId(1, spec.index, x0, y0),
                        NodeId(1, spec.index, x1, y1),
                        spec.sheet_resistance * length_um,
                    )
                )

    pads = _place_pads(cfg, plan, node_coords)
    carcass = PdnGraph.build(
        edges=wire_edges + via_edges,
        pads=pads,
        dbu_per_micron=cfg.dbu_per_micron,
    )
    sinks = _place_sinks(cfg, carcass, rng)
    return PdnGraph.build(
        edges=carcass.edges,
        sinks=sinks,
        pads=pads,
        nodes=carcass.nodes,
        dbu_per_micron=cfg.dbu_per_micron,
    )


def _place_pads(
    cfg: GenConfig,
    plan: _Plan,
    node_coords: dict[int, set[tuple[int, int]]],
) -> list[VoltageSource]:
    top = cfg.layers[-1]
    coords = sorted(node_coords[top.index])
    if not coords:
        raise GenError("top layer has no nodes to host pads")
    along_x = top.axis is Axis.HORIZONTAL
    lanes: dict[int, list[tuple[int, int]]] = {}
    for x, y in coords:
        lanes.setdefault(y if along_x else x, []).append((x, y))

    chosen: set[tuple[int, int]] = set()
    if cfg.pad_rule == "stripe_ends":
        for fixed in sorted(lanes):
            lane = sorted(lanes[fixed])
            chosen.add(lane[0])
            chosen.add(lane[-1])
    else:  # grid: near-uniform targets snapped to real nodes
        side = max(1, math.ceil(math.sqrt(cfg.pad_count)))
        xs = np.array([c[0] for c in coords], dtype=np.float64)
        ys = np.array([c[1] for c in coords], dtype=np.float64)
        w_dbu = cfg.chip_width * cfg.dbu_per_micron
        h_dbu = cfg.chip_height * cfg.dbu_per_micron
        placed = 0
        for j in range(side):
            for i in range(side):
                if placed >= cfg.pad_count:
                    break
                tx = (i + 0.5) / side * w_dbu
                ty = (j + 0.5) / side * h_dbu
                k = int(np.argmin(np.abs(xs - tx) + np.abs(ys - ty)))
                chosen.add(coords[k])
                placed += 1
        # Every top stripe must be anchored or its deliveries dead-end.
        for fixed in sorted(lanes):
            lane = sorted(lanes[fixed])
            if not any(c in chosen for c in lane):
                chosen.add(lane[len(lane) // 2])

    return [
        VoltageSource(NodeId(1, top.index, x, y), cfg.vdd)
        for x, y in sorted(chosen)
    ]


def _place_sinks(
    cfg: GenConfig, carcass: PdnGraph, rng: np.random.Generator
) -> list[CurrentSource]:
    bottom_index = cfg.layers[0].index
    reachable = connected_to_pads(carcass)
    candidates = sorted(
        n for n in carcass.nodes if n.layer == bottom_index and n in reachable
    )
    if not candidates:
        raise GenError("no layer-1 node is reachable from a pad; sinks would float")

    currents = rng.uniform(cfg.sink_current_min, cfg.sink_current_max, cfg.sink_count)
    if cfg.sink_distribution == "uniform":
        picks = rng.integers(0, len(candidates), cfg.sink_count)
    else:  # clustered: 2-D Gaussian mixture snapped to candidate nodes
        n_clusters = min(3, len(candidates))
        dbu = cfg.dbu_per_micron
        centers = rng.uniform(
            [0.0, 0.0], [cfg.chip_width * dbu, cfg.chip_height * dbu], (n_clusters, 2)
        )
        sigma = min(cfg.chip_width, cfg.chip_height) * dbu / 8.0
        which = rng.integers(0, n_clusters, cfg.sink_count)
        points = centers[which] + rng.normal(0.0, sigma, (cfg.sink_count, 2))
        xs = np.array([n.x for n in candidates], dtype=np.float64)
        ys = np.array([n.y for n in candidates], dtype=np.float64)
        picks = np.array(
            [
                int(np.argmin((xs - px) ** 2 + (ys - py) ** 2))
                for px, py in points
            ]
        )
    return [
        CurrentSource(candidates[int(k)], float(c)) for k, c in zip(picks, currents)
    ]


def scaled_config(cfg: GenConfig, **overrides) -> GenConfig:
    """Convenience for sweeps: replace(cfg, ...) with validation rerun."""
    return replace(cfg, **overrides)
