"""Resistive power-grid netlists: parsing, validation, serialization, stripes.

Input format (line oriented, ASCII):

    R<id> <node> <node> <ohms>     resistor
    I<id> <node> 0 <amperes>       current sink (node -> ground)
    V<id> <node> 0 <volts>         supply pad
    <node> := n<net>_m<layer>_<x>_<y>      x, y in database units

Comment lines start with "*", blank lines are ignored, and an optional
".end" terminates the file. Coordinates convert to microns through
`dbu_per_micron` (default 2000).

A parsed `PdnGraph` is immutable. Resistor edges are classified by
geometry: a Via joins two layers at one (x, y) column; a Wire joins two
same-layer nodes that differ in exactly one coordinate. `extract_stripes`
decomposes each layer's wires into maximal 1-D chains, the unit of the
localized distillation solve.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, NamedTuple

_NODE_RE = re.compile(r"^n(\d+)_m(\d+)_(\d+)_(\d+)$")

DEFAULT_DBU_PER_MICRON = 2000


class NetlistError(ValueError):
    """Parse or structural failure; `line` is 1-based when it applies."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Axis(Enum):
    HORIZONTAL = "horizontal"  # nodes vary in x
    VERTICAL = "vertical"      # nodes vary in y


class EdgeKind(Enum):
    WIRE = "wire"
    VIA = "via"


class PinKind(Enum):
    PAD = "pad"
    UP_VIA = "up_via"


class NodeId(NamedTuple):
    """(net, layer, x, y); x and y are in DBU. Tuple order defines node order."""

    net: int
    layer: int
    x: int
    y: int

    @property
    def name(self) -> str:
        return f"n{self.net}_m{self.layer}_{self.x}_{self.y}"

    def position_um(self, dbu_per_micron: int) -> tuple[float, float]:
        return self.x / dbu_per_micron, self.y / dbu_per_micron

    @classmethod
    def from_name(cls, name: str) -> "NodeId":
        m = _NODE_RE.match(name)
        if not m:
            raise NetlistError(f"malformed node name {name!r}")
        net, layer, x, y = (int(g) for g in m.groups())
        if layer < 1:
            raise NetlistError(f"node {name!r}: layer must be >= 1")
        return cls(net, layer, x, y)


def _classify(a: NodeId, b: NodeId) -> EdgeKind:
    if a == b:
        raise NetlistError(f"resistor joins node {a.name} to itself")
    if a.net != b.net:
        raise NetlistError(f"resistor joins different nets: {a.name}, {b.name}")
    if a.layer != b.layer:
        if a.x == b.x and a.y == b.y:
            return EdgeKind.VIA
        raise NetlistError(
            f"edge {a.name} - {b.name} spans layers without sharing a column"
        )
    differs = (a.x != b.x) + (a.y != b.y)
    if differs == 1:
        return EdgeKind.WIRE
    raise NetlistError(f"edge {a.name} - {b.name} is diagonal (both coordinates differ)")


@dataclass(frozen=True)
class ResistorEdge:
    a: NodeId
    b: NodeId
    resistance: float
    kind: EdgeKind

    @classmethod
    def between(cls, a: NodeId, b: NodeId, resistance: float) -> "ResistorEdge":
        """Classify by geometry and normalize endpoint order (a <= b)."""
        if resistance <= 0:
            raise NetlistError(
                f"resistance must be positive, got {resistance} between {a.name}, {b.name}"
            )
        kind = _classify(a, b)
        if b < a:
            a, b = b, a
        return cls(a, b, float(resistance), kind)

    @property
    def pair(self) -> tuple[NodeId, NodeId]:
        return self.a, self.b

    @property
    def axis(self) -> Axis | None:
        """Routing direction for wires; None for vias."""
        if self.kind is not EdgeKind.WIRE:
            return None
        return Axis.HORIZONTAL if self.a.y == self.b.y else Axis.VERTICAL

    def other(self, n: NodeId) -> NodeId:
        return self.b if n == self.a else self.a


@dataclass(frozen=True)
class CurrentSource:
    """Sink convention: `current` amperes flow node -> ground."""

    node: NodeId
    current: float

    def __post_init__(self):
        if self.current < 0:
            raise NetlistError(f"sink current must be >= 0, got {self.current}")


@dataclass(frozen=True)
class VoltageSource:
    node: NodeId
    voltage: float

    def __post_init__(self):
        if self.voltage <= 0:
            raise NetlistError(f"pad voltage must be positive, got {self.voltage}")


@dataclass(frozen=True)
class PdnGraph:
    nodes: frozenset[NodeId]
    edges: tuple[ResistorEdge, ...]
    sinks: tuple[CurrentSource, ...]
    pads: tuple[VoltageSource, ...]
    dbu_per_micron: int = DEFAULT_DBU_PER_MICRON

    @classmethod
    def build(
        cls,
        edges: Iterable[ResistorEdge],
        sinks: Iterable[CurrentSource] = (),
        pads: Iterable[VoltageSource] = (),
        nodes: Iterable[NodeId] | None = None,
        dbu_per_micron: int = DEFAULT_DBU_PER_MICRON,
    ) -> "PdnGraph":
        edges = tuple(edges)
        sinks = tuple(sinks)
        pads = tuple(pads)
        node_set = set() if nodes is None else set(nodes)
        for e in edges:
            node_set.add(e.a)
            node_set.add(e.b)
        if nodes is None:
            node_set.update(s.node for s in sinks)
            node_set.update(p.node for p in pads)
        else:
            for s in sinks:
                if s.node not in node_set:
                    raise NetlistError(f"sink references unknown node {s.node.name}")
            for p in pads:
                if p.node not in node_set:
                    raise NetlistError(f"pad references unknown node {p.node.name}")
        voltages = {p.voltage for p in pads}
        if len(voltages) > 1:
            raise NetlistError(f"pads carry conflicting voltages: {sorted(voltages)}")
        if dbu_per_micron < 1:
            raise NetlistError(f"dbu_per_micron must be >= 1, got {dbu_per_micron}")
        return cls(frozenset(node_set), edges, sinks, pads, dbu_per_micron)

    @cached_property
    def vdd(self) -> float | None:
        """Supply voltage shared by all pads; None when the graph has no pad."""
        return self.pads[0].voltage if self.pads else None

    @cached_property
    def pad_nodes(self) -> frozenset[NodeId]:
        return frozenset(p.node for p in self.pads)

    @cached_property
    def sink_current(self) -> dict[NodeId, float]:
        """Total sink current per node (multiple sources on one node sum)."""
        totals: dict[NodeId, float] = {}
        for s in self.sinks:
            totals[s.node] = totals.get(s.node, 0.0) + s.current
        return totals

    @cached_property
    def extent(self) -> tuple[int, int, int, int]:
        """(min_x, min_y, max_x, max_y) over all nodes, in DBU."""
        if not self.nodes:
            return (0, 0, 0, 0)
        xs = [n.x for n in self.nodes]
        ys = [n.y for n in self.nodes]
        return (min(xs), min(ys), max(xs), max(ys))

    @cached_property
    def layers(self) -> tuple[int, ...]:
        return tuple(sorted({n.layer for n in self.nodes}))

    @cached_property
    def total_sink_current(self) -> float:
        return float(sum(s.current for s in self.sinks))

    def edges_at(self) -> dict[NodeId, list[ResistorEdge]]:
        incident: dict[NodeId, list[ResistorEdge]] = {n: [] for n in self.nodes}
        for e in self.edges:
            incident[e.a].append(e)
            incident[e.b].append(e)
        return incident

    def restrict_to_net(self, net: int = 1) -> "PdnGraph":
        return PdnGraph.build(
            edges=[e for e in self.edges if e.a.net == net],
            sinks=[s for s in self.sinks if s.node.net == net],
            pads=[p for p in self.pads if p.node.net == net],
            nodes=[n for n in self.nodes if n.net == net],
            dbu_per_micron=self.dbu_per_micron,
        )

    def scale_sinks(self, factor: float) -> "PdnGraph":
        return PdnGraph.build(
            edges=self.edges,
            sinks=[CurrentSource(s.node, s.current * factor) for s in self.sinks],
            pads=self.pads,
            nodes=self.nodes,
            dbu_per_micron=self.dbu_per_micron,
        )


def parse_netlist(text: str, dbu_per_micron: int = DEFAULT_DBU_PER_MICRON) -> PdnGraph:
    edges: list[ResistorEdge] = []
    sinks: list[CurrentSource] = []
    pads: list[VoltageSource] = []

    def parse_float(tok: str, lineno: int) -> float:
        try:
            v = float(tok)
        except ValueError:
            raise NetlistError(f"expected a number, got {tok!r}", lineno) from None
        if v != v or v in (float("inf"), float("-inf")):
            raise NetlistError(f"non-finite value {tok!r}", lineno)
        return v

    def parse_node(tok: str, lineno: int) -> NodeId:
        try:
            return NodeId.from_name(tok)
        except NetlistError as exc:
            raise NetlistError(str(exc), lineno) from None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("*"):
            continue
        if line.lower() == ".end":
            break
        if line.startswith("."):
            raise NetlistError(f"unsupported card {line.split()[0]!r}", lineno)
        toks = line.split()
        head = toks[0]
        kind = head[0].upper()
        if kind not in ("R", "I", "V"):
            raise NetlistError(f"unknown element {head!r}", lineno)
        if len(toks) != 4:
            raise NetlistError(
                f"{head!r} needs 3 arguments, got {len(toks) - 1}", lineno
            )
        if kind == "R":
            a = parse_node(toks[1], lineno)
            b = parse_node(toks[2], lineno)
            value = parse_float(toks[3], lineno)
            try:
                edges.append(ResistorEdge.between(a, b, value))
            except NetlistError as exc:
                raise NetlistError(str(exc), lineno) from None
        else:
            node = parse_node(toks[1], lineno)
            if toks[2] != "0":
                raise NetlistError(
                    f"{head!r}: second terminal must be ground \"0\", got {toks[2]!r}",
                    lineno,
                )
            value = parse_float(toks[3], lineno)
            try:
                if kind == "I":
                    sinks.append(CurrentSource(node, value))
                else:
                    pads.append(VoltageSource(node, value))
            except NetlistError as exc:
                raise NetlistError(str(exc), lineno) from None

    try:
        return PdnGraph.build(
            edges=edges, sinks=sinks, pads=pads, dbu_per_micron=dbu_per_micron
        )
    except NetlistError as exc:
        raise NetlistError(str(exc)) from None


def serialize_netlist(g: PdnGraph) -> str:
    """Deterministic text form; parse(serialize(g)) reproduces g's content.

    Values are written with repr(), which round-trips Python floats exactly.
    """
    out: list[str] = []
    for i, p in enumerate(sorted(g.pads, key=lambda p: (p.node, p.voltage)), start=1):
        out.append(f"V{i} {p.node.name} 0 {p.voltage!r}")
    for i, s in enumerate(sorted(g.sinks, key=lambda s: (s.node, s.current)), start=1):
        out.append(f"I{i} {s.node.name} 0 {s.current!r}")
    edges = sorted(g.edges, key=lambda e: (e.a, e.b, e.resistance))
    for i, e in enumerate(edges, start=1):
        out.append(f"R{i} {e.a.name} {e.b.name} {e.resistance!r}")
    out.append(".end")
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class Stripe:
    """Maximal 1-D chain of same-layer wire segments.

    `ordered_nodes` is strictly monotone in the varying coordinate;
    `segment_resistances[k]` joins nodes k and k+1. `taps` carries the sink
    current owned by each node (a node shared between stripes is tapped in
    exactly one of them); `pins` marks pads and upward vias.
    """

    layer: int
    axis: Axis
    ordered_nodes: tuple[NodeId, ...]
    segment_resistances: tuple[float, ...]
    taps: tuple[float, ...] = field(default=())
    pins: tuple[PinKind | None, ...] = field(default=())

    def __post_init__(self):
        n = len(self.ordered_nodes)
        if n == 0:
            raise NetlistError("stripe has no nodes")
        if len(self.segment_resistances) != n - 1:
            raise NetlistError("segment resistance count must be node count - 1")
        if not self.taps:
            object.__setattr__(self, "taps", (0.0,) * n)
        if not self.pins:
            object.__setattr__(self, "pins", (None,) * n)
        coords = self.varying_coords
        if any(c2 <= c1 for c1, c2 in zip(coords, coords[1:])):
            raise NetlistError("stripe nodes must be strictly monotone along the axis")

    @property
    def varying_coords(self) -> tuple[int, ...]:
        if self.axis is Axis.HORIZONTAL:
            return tuple(n.x for n in self.ordered_nodes)
        return tuple(n.y for n in self.ordered_nodes)

    @property
    def fixed_coord(self) -> int:
        n = self.ordered_nodes[0]
        return n.y if self.axis is Axis.HORIZONTAL else n.x

    @property
    def pin_indices(self) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.pins) if p is not None)

    def __len__(self) -> int:
        return len(self.ordered_nodes)


def _wire_group_key(e: ResistorEdge) -> tuple[int, Axis, int]:
    if e.a.y == e.b.y:  # x varies
        return (e.a.layer, Axis.HORIZONTAL, e.a.y)
    return (e.a.layer, Axis.VERTICAL, e.a.x)


def extract_stripes(
    g: PdnGraph, diagnostics: list[str] | None = None
) -> list[Stripe]:
    """Decompose wires into stripes; every Wire edge lands in exactly one.

    Nodes that carry a sink, pad, or via but touch no wire become
    single-node stripes so downstream passes see every tapped node.
    A node with wires along both axes of its layer belongs to one stripe
    per axis (the chain splits at the branch); a diagnostic records it.
    """
    diags = diagnostics if diagnostics is not None else []
    groups: dict[tuple[int, Axis, int], dict[NodeId, list[ResistorEdge]]] = {}
    for e in g.edges:
        if e.kind is not EdgeKind.WIRE:
            continue
        adj = groups.setdefault(_wire_group_key(e), {})
        adj.setdefault(e.a, []).append(e)
        adj.setdefault(e.b, []).append(e)

    # Branch detection: same node, same layer, wires on both axes.
    node_axes: dict[NodeId, set[Axis]] = {}
    for (layer, axis, _), adj in groups.items():
        for n in adj:
            node_axes.setdefault(n, set()).add(axis)
    for n in sorted(node_axes):
        if len(node_axes[n]) > 1:
            diags.append(
                f"branching node {n.name}: layer {n.layer} mixes horizontal and "
                f"vertical wires; chains split at the branch"
            )

    chains: list[tuple[int, Axis, tuple[NodeId, ...], tuple[float, ...]]] = []
    for (layer, axis, _), adj in sorted(
        groups.items(), key=lambda kv: (kv[0][0], kv[0][1].value, kv[0][2])
    ):
        seen: set[NodeId] = set()
        for start in sorted(adj):
            if start in seen:
                continue
            component = [start]
            seen.add(start)
            frontier = [start]
            while frontier:
                cur = frontier.pop()
                for e in adj[cur]:
                    nxt = e.other(cur)
                    if nxt not in seen:
                        seen.add(nxt)
                        component.append(nxt)
                        frontier.append(nxt)
            component.sort()
            pair_res: dict[tuple[NodeId, NodeId], list[float]] = {}
            for n in component:
                for e in adj[n]:
                    if n == e.a:  # count each edge once, not per endpoint
                        pair_res.setdefault(e.pair, []).append(e.resistance)
            resistances = []
            for left, right in zip(component, component[1:]):
                rs = pair_res.pop((left, right), [])
                if len(rs) != 1:
                    problem = "duplicate wires" if rs else "no wire"
                    raise NetlistError(
                        f"{problem} between consecutive stripe nodes "
                        f"{left.name} and {right.name}"
                    )
                resistances.append(rs[0])
            if pair_res:
                a, b = next(iter(pair_res))
                raise NetlistError(
                    f"wire {a.name} - {b.name} spans over another node on its stripe"
                )
            chains.append((layer, axis, tuple(component), tuple(resistances)))

    covered = {n for _, _, nodes, _ in chains for n in nodes}
    via_touched: set[NodeId] = set()
    for e in g.edges:
        if e.kind is EdgeKind.VIA:
            via_touched.add(e.a)
            via_touched.add(e.b)
    loose = sorted(
        n
        for n in g.nodes
        if n not in covered
        and (n in via_touched or n in g.pad_nodes or g.sink_current.get(n, 0.0) > 0.0)
    )
    for n in loose:
        chains.append((n.layer, Axis.HORIZONTAL, (n,), ()))

    chains.sort(key=lambda c: (c[0], c[1].value, c[2][0]))

    up_via_nodes: set[NodeId] = set()
    for e in g.edges:
        if e.kind is EdgeKind.VIA:
            lower = e.a if e.a.layer < e.b.layer else e.b
            up_via_nodes.add(lower)

    owner: set[NodeId] = set()
    stripes: list[Stripe] = []
    for layer, axis, nodes, resistances in chains:
        taps = []
        pins: list[PinKind | None] = []
        for n in nodes:
            if n not in owner and g.sink_current.get(n, 0.0) > 0.0:
                taps.append(g.sink_current[n])
            else:
                taps.append(0.0)
            owner.add(n)
            if n in g.pad_nodes:
                pins.append(PinKind.PAD)
            elif n in up_via_nodes:
                pins.append(PinKind.UP_VIA)
            else:
                pins.append(None)
        stripes.append(
            Stripe(layer, axis, nodes, resistances, tuple(taps), tuple(pins))
        )
    return stripes


class _UnionFind:
    def __init__(self):
        self.parent: dict[NodeId, NodeId] = {}

    def find(self, n: NodeId) -> NodeId:
        root = n
        while self.parent.get(root, root) != root:
            root = self.parent[root]
        while self.parent.get(n, n) != n:
            self.parent[n], n = root, self.parent[n]
        return root

    def union(self, a: NodeId, b: NodeId) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def connected_to_pads(g: PdnGraph) -> frozenset[NodeId]:
    """Nodes with a resistive path to at least one pad."""
    uf = _UnionFind()
    for e in g.edges:
        uf.union(e.a, e.b)
    pad_roots = {uf.find(p) for p in g.pad_nodes}
    return frozenset(n for n in g.nodes if uf.find(n) in pad_roots)


def validate(g: PdnGraph) -> list[str]:
    """Structural diagnostics; an empty list means the graph is clean."""
    diags: list[str] = []

    pair_counts: dict[tuple[NodeId, NodeId], int] = {}
    for e in g.edges:
        pair_counts[e.pair] = pair_counts.get(e.pair, 0) + 1
    for (a, b), count in sorted(pair_counts.items()):
        if count > 1:
            diags.append(f"duplicate edge {a.name} - {b.name} ({count} resistors)")

    degree = {n: 0 for n in g.nodes}
    for e in g.edges:
        degree[e.a] += 1
        degree[e.b] += 1
    for n in sorted(g.nodes):
        if degree[n] == 0:
            diags.append(f"dangling node {n.name}")

    reachable = connected_to_pads(g)
    for s in sorted(g.sinks, key=lambda s: s.node):
        if s.node not in reachable:
            diags.append(f"disconnected sink at {s.node.name} (no path to any pad)")

    try:
        stripes = extract_stripes(g, diags)
    except NetlistError as exc:
        diags.append(f"stripe extraction failed: {exc}")
        return diags
    for s in stripes:
        if not s.pin_indices:
            first = s.ordered_nodes[0]
            diags.append(
                f"unanchored stripe on layer {s.layer} starting at {first.name} "
                f"(no pad or upward via)"
            )
    return diags
