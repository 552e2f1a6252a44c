"""Hypothetical IR-drop distillation: linear-time per-layer drop maps.

Instead of solving the whole mesh, each 1-D stripe is solved in closed form
by superposition. The bottom-up pass walks layers from the lowest metal up:
pads and upward vias act as VDD sources, sinks plus the currents delivered
by lower-layer vias act as taps, and each stripe's pin currents are handed
to the layer above through its vias. The top-down pass then walks back
down, turning via currents back into voltages: a via node inherits the
upper layer's voltage minus the via drop, other nodes take the resistive
voltage division between their nearest pinned neighbors minus the stripe's
own localized drop profile. Rasterizing (vdd - voltage) per layer gives the
hypothetical IR-drop maps; they are features, not a solver, and are exact
only for single-layer grids.

Per stripe the work is a handful of prefix sums over its node count, so the
whole distillation is linear in network size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import GridSpec, ScalarGrid
from .netlist import (
    Axis,
    EdgeKind,
    NodeId,
    PdnGraph,
    ResistorEdge,
    Stripe,
    extract_stripes,
)


class DistillationError(ValueError):
    pass


class UnanchoredStripeError(DistillationError):
    pass


@dataclass(frozen=True)
class Segment:
    """Node index range [start, end] of a stripe, anchored by 1 or 2 pins.

    Two-pin segments are bounded by consecutive pins; the stretch before the
    first pin / after the last pin forms a one-pin boundary segment.
    """

    start: int
    end: int
    pin_indices: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= len(self.pin_indices) <= 2:
            raise DistillationError("segment needs one or two pins")
        if any(p not in (self.start, self.end) for p in self.pin_indices):
            raise DistillationError("segment pins must sit on its endpoints")


def segment_stripe(stripe: Stripe, pins) -> list[Segment]:
    """Tile the stripe into segments bounded by the pinned node indices."""
    n = len(stripe)
    pin_list = sorted(set(int(p) for p in pins))
    if not pin_list:
        raise UnanchoredStripeError(
            f"stripe on layer {stripe.layer} has no pinned node"
        )
    if pin_list[0] < 0 or pin_list[-1] >= n:
        raise DistillationError(f"pin index out of range 0..{n - 1}: {pin_list}")
    segments: list[Segment] = []
    if pin_list[0] > 0:
        segments.append(Segment(0, pin_list[0], (pin_list[0],)))
    for p, q in zip(pin_list, pin_list[1:]):
        segments.append(Segment(p, q, (p, q)))
    if pin_list[-1] < n - 1:
        segments.append(Segment(pin_list[-1], n - 1, (pin_list[-1],)))
    return segments


@dataclass
class StripeSolution:
    """Closed-form superposition solution of one stripe.

    `span_currents[k]` is the signed current between nodes k and k+1
    (positive toward the higher index); `pin_currents` maps pinned node
    index to the current that pin injects into the stripe. Via drops are
    filled in by the bottom-up pass once via resistances are known.
    """

    stripe: Stripe
    voltages: np.ndarray
    span_currents: np.ndarray
    pin_currents: dict[int, float]
    equivalent_resistance: np.ndarray
    taps: np.ndarray
    pin_via_drops: dict[int, float] = field(default_factory=dict)
    degenerate: bool = False

    @property
    def total_tap_current(self) -> float:
        return float(self.taps.sum())

    @property
    def total_pin_current(self) -> float:
        return float(sum(self.pin_currents.values()))

    def conservation_residual(self) -> float:
        total = self.total_tap_current
        if total == 0.0:
            return abs(self.total_pin_current)
        return abs(self.total_pin_current - total) / total


def localized_solve(
    stripe: Stripe,
    pin_voltages: dict[int, float],
    taps=None,
) -> StripeSolution:
    """Solve one stripe with its pins held at fixed voltages.

    Superposition in closed form: a tap I_n between two pins splits as
    I_n * R_n / r toward each pin, where R_n is the parallel resistance to
    both pins and r the series resistance toward that pin; one-pin boundary
    segments return everything through their single pin. Span currents
    accumulate by prefix sums and voltages by a resistance-weighted running
    sum, so the cost is linear in the node count.
    """
    n = len(stripe)
    taps_arr = np.array(stripe.taps if taps is None else taps, dtype=np.float64)
    if taps_arr.shape != (n,):
        raise DistillationError(f"expected {n} tap currents, got {taps_arr.shape}")
    r = np.asarray(stripe.segment_resistances, dtype=np.float64)
    if np.any(r <= 0):
        raise DistillationError("non-positive segment resistance")
    segments = segment_stripe(stripe, pin_voltages.keys())

    c = np.concatenate(([0.0], np.cumsum(r)))  # cumulative ohms to node k
    t = np.zeros(max(n - 1, 0))
    R_eq = np.zeros(n)

    for seg in segments:
        a, b = seg.start, seg.end
        if a == b:
            continue
        I_seg = taps_arr[a : b + 1].copy()
        # A tap on a pinned node feeds that pin directly, never the spans.
        for p in seg.pin_indices:
            I_seg[p - a] = 0.0
        if len(seg.pin_indices) == 2:
            L = c[b] - c[a]
            cj = c[a : b + 1] - c[a]
            from_left = I_seg * (L - cj) / L   # supplied by the left pin
            from_right = I_seg * cj / L        # supplied by the right pin
            # Span k carries what the left pin feeds to taps beyond it minus
            # what the right pin feeds to taps at or before it.
            t[a:b] = (from_left.sum() - np.cumsum(from_left)[:-1]) - np.cumsum(
                from_right
            )[:-1]
            va, vb = pin_voltages[a], pin_voltages[b]
            if va != vb:
                t[a:b] += (va - vb) / L
            R_eq[a + 1 : b] = cj[1:-1] * (L - cj[1:-1]) / L
        elif seg.pin_indices[0] == b:  # boundary before the first pin
            t[a:b] = -np.cumsum(I_seg)[:-1]
            R_eq[a:b] = c[b] - c[a:b]
        else:  # boundary after the last pin
            t[a:b] = I_seg.sum() - np.cumsum(I_seg)[:-1]
            R_eq[a + 1 : b + 1] = c[a + 1 : b + 1] - c[a]

    # Voltages: running resistance-weighted sum, re-anchored per segment.
    drop_prefix = np.concatenate(([0.0], np.cumsum(t * r))) if n > 1 else np.zeros(1)
    voltages = np.empty(n)
    for seg in segments:
        anchor = seg.pin_indices[0]
        voltages[seg.start : seg.end + 1] = pin_voltages[anchor] - (
            drop_prefix[seg.start : seg.end + 1] - drop_prefix[anchor]
        )
    for p, v in pin_voltages.items():
        voltages[p] = v

    pin_currents: dict[int, float] = {}
    for p in sorted(pin_voltages):
        inflow = taps_arr[p]
        if p < n - 1:
            inflow += t[p]
        if p > 0:
            inflow -= t[p - 1]
        pin_currents[p] = float(inflow)

    return StripeSolution(
        stripe=stripe,
        voltages=voltages,
        span_currents=t,
        pin_currents=pin_currents,
        equivalent_resistance=R_eq,
        taps=taps_arr,
    )


def _degenerate_solution(
    stripe: Stripe, taps_arr: np.ndarray, vdd: float
) -> StripeSolution:
    n = len(stripe)
    return StripeSolution(
        stripe=stripe,
        voltages=np.full(n, vdd),
        span_currents=np.zeros(max(n - 1, 0)),
        pin_currents={},
        equivalent_resistance=np.zeros(n),
        taps=taps_arr,
        degenerate=True,
    )


@dataclass
class BottomUpResult:
    stripes: list[Stripe]
    solutions: list[StripeSolution]
    via_currents: dict[ResistorEdge, float]
    via_drops: dict[ResistorEdge, float]
    pad_currents: dict[NodeId, float]
    delivered: dict[NodeId, float]
    lost_current: float
    diagnostics: list[str]
    vdd: float
    op_units: int

    @property
    def total_pad_current(self) -> float:
        return float(sum(self.pad_currents.values()))

    @property
    def total_sink_current(self) -> float:
        return float(sum(sum(s.taps) for s in self.stripes))

    def conservation_residual(self) -> float:
        """Relative mismatch between pad supply (+ lost current) and sinks."""
        sunk = self.total_sink_current
        if sunk == 0.0:
            return abs(self.total_pad_current + self.lost_current)
        return abs(self.total_pad_current + self.lost_current - sunk) / sunk


def _node_owner(stripes: list[Stripe]) -> dict[NodeId, int]:
    owner: dict[NodeId, int] = {}
    for si, s in enumerate(stripes):
        for node in s.ordered_nodes:
            owner.setdefault(node, si)
    return owner


def _upward_vias(g: PdnGraph) -> dict[NodeId, list[ResistorEdge]]:
    up: dict[NodeId, list[ResistorEdge]] = {}
    for e in g.edges:
        if e.kind is EdgeKind.VIA:
            lower = e.a if e.a.layer < e.b.layer else e.b
            up.setdefault(lower, []).append(e)
    return up


def bottom_up_pass(
    g: PdnGraph,
    vdd: float | None = None,
    stripes: list[Stripe] | None = None,
) -> BottomUpResult:
    """Walk layers upward, solving stripes and handing currents to vias.

    Every pad or upward via pins its stripe at vdd; after a layer is solved
    the per-node pin currents split across that node's upward vias by
    conductance (parallel vias see one shared drop) and arrive as taps on
    the layer above. Pads absorb their current. Unanchored stripes cannot
    propagate anything: their taps are dropped with a diagnostic.
    """
    diagnostics: list[str] = []
    if stripes is None:
        stripes = extract_stripes(g, diagnostics)
    if vdd is None:
        vdd = g.vdd
    if vdd is None:
        raise DistillationError("no pads and no explicit vdd; pins are undefined")

    owner = _node_owner(stripes)
    up_vias = _upward_vias(g)
    by_layer: dict[int, list[int]] = {}
    for si, s in enumerate(stripes):
        by_layer.setdefault(s.layer, []).append(si)

    solutions: list[StripeSolution | None] = [None] * len(stripes)
    delivered: dict[NodeId, float] = {}
    via_currents: dict[ResistorEdge, float] = {}
    via_drops: dict[ResistorEdge, float] = {}
    pad_currents: dict[NodeId, float] = {}
    lost = 0.0
    op_units = 0

    for layer in sorted(by_layer):
        inflow: dict[NodeId, float] = {}
        pin_nodes_here: dict[NodeId, list[StripeSolution]] = {}
        for si in by_layer[layer]:
            stripe = stripes[si]
            taps_arr = np.array(stripe.taps, dtype=np.float64)
            for k, node in enumerate(stripe.ordered_nodes):
                if owner[node] == si and node in delivered:
                    taps_arr[k] += delivered[node]
            pins = stripe.pin_indices
            op_units += len(stripe)
            if not pins:
                dropped = float(taps_arr.sum())
                lost += dropped
                diagnostics.append(
                    f"unanchored stripe on layer {layer} at "
                    f"{stripe.ordered_nodes[0].name}: {dropped:g} A not propagated"
                )
                solutions[si] = _degenerate_solution(stripe, taps_arr, vdd)
                continue
            sol = localized_solve(stripe, {p: vdd for p in pins}, taps_arr)
            solutions[si] = sol
            for p, amps in sol.pin_currents.items():
                node = stripe.ordered_nodes[p]
                inflow[node] = inflow.get(node, 0.0) + amps
                pin_nodes_here.setdefault(node, []).append(sol)

        for node in sorted(inflow):
            amps = inflow[node]
            if node in g.pad_nodes:
                pad_currents[node] = pad_currents.get(node, 0.0) + amps
                continue
            vias = up_vias.get(node, [])
            g_total = sum(1.0 / e.resistance for e in vias)
            if g_total == 0.0:  # pin marker without a usable via: defensive
                lost += amps
                continue
            bundle_drop = amps / g_total
            for e in vias:
                share = amps / (e.resistance * g_total)
                via_currents[e] = via_currents.get(e, 0.0) + share
                via_drops[e] = via_drops.get(e, 0.0) + share * e.resistance
                upper = e.b if e.b.layer > e.a.layer else e.a
                delivered[upper] = delivered.get(upper, 0.0) + share
            for sol in pin_nodes_here[node]:
                for p in sol.pin_currents:
                    if sol.stripe.ordered_nodes[p] == node:
                        sol.pin_via_drops[p] = bundle_drop

    return BottomUpResult(
        stripes=stripes,
        solutions=[s for s in solutions if s is not None],
        via_currents=via_currents,
        via_drops=via_drops,
        pad_currents=pad_currents,
        delivered=delivered,
        lost_current=lost,
        diagnostics=diagnostics,
        vdd=float(vdd),
        op_units=op_units,
    )


@dataclass
class TopDownState:
    """Per-node propagated voltages after the downward pass.

    `interpolated` keeps the pure resistive-division values (before the
    localized profile is subtracted); interpolation never leaves the hull
    of the contributing pin voltages. `dbu_per_micron` carries the source
    graph's coordinate scale for rasterization.
    """

    stripes: list[Stripe]
    bottom_up: BottomUpResult
    voltages: dict[NodeId, float]
    interpolated: dict[NodeId, float]
    pinned: dict[NodeId, float]
    diagnostics: list[str]
    vdd: float
    dbu_per_micron: int


def top_down_pass(g: PdnGraph, bottom_up: BottomUpResult) -> TopDownState:
    """Walk layers downward, converting via currents back into voltages.

    A pad pins its node at vdd; a via node inherits the upper layer's
    propagated voltage minus the via's bottom-up drop. Other nodes take the
    resistive voltage division between the nearest pinned nodes on their
    stripe, then subtract the stripe's own localized drop profile.
    """
    vdd = bottom_up.vdd
    stripes = bottom_up.stripes
    owner = _node_owner(stripes)
    up_vias = _upward_vias(g)
    diagnostics: list[str] = []
    voltages: dict[NodeId, float] = {}
    interpolated: dict[NodeId, float] = {}
    pinned: dict[NodeId, float] = {}

    by_layer: dict[int, list[int]] = {}
    for si, s in enumerate(stripes):
        by_layer.setdefault(s.layer, []).append(si)

    def pin_voltage(node: NodeId) -> float:
        if node in pinned:
            return pinned[node]
        if node in g.pad_nodes:
            v = vdd
        else:
            num = den = 0.0
            for e in up_vias.get(node, ()):
                upper = e.b if e.b.layer > e.a.layer else e.a
                if upper not in voltages:
                    continue
                cond = 1.0 / e.resistance
                num += cond * (voltages[upper] - bottom_up.via_drops.get(e, 0.0))
                den += cond
            v = num / den if den > 0 else vdd
        pinned[node] = v
        return v

    for layer in sorted(by_layer, reverse=True):
        for si in by_layer[layer]:
            stripe = stripes[si]
            sol = bottom_up.solutions[si]
            nodes = stripe.ordered_nodes
            pins = stripe.pin_indices
            if not pins or sol.degenerate:
                diagnostics.append(
                    f"stripe on layer {layer} at {nodes[0].name} has no pinned "
                    f"voltage; propagating vdd"
                )
                for node in nodes:
                    if owner[node] == si:
                        voltages[node] = vdd
                        interpolated[node] = vdd
                continue
            r = np.asarray(stripe.segment_resistances, dtype=np.float64)
            c = np.concatenate(([0.0], np.cumsum(r)))
            pin_pos = c[list(pins)]
            pin_v = np.array([pin_voltage(nodes[p]) for p in pins])
            # Resistive voltage division between the two nearest pins is
            # linear interpolation in the cumulative-resistance coordinate.
            interp = np.interp(c, pin_pos, pin_v)
            prop = interp - (vdd - sol.voltages)
            for k, p in enumerate(pins):
                prop[p] = pin_v[k]
            for k, node in enumerate(nodes):
                if owner[node] == si:
                    voltages[node] = float(prop[k])
                    interpolated[node] = float(interp[k])

    return TopDownState(
        stripes=stripes,
        bottom_up=bottom_up,
        voltages=voltages,
        interpolated=interpolated,
        pinned=pinned,
        diagnostics=diagnostics,
        vdd=vdd,
        dbu_per_micron=g.dbu_per_micron,
    )


def _line_values(positions: np.ndarray, drops: np.ndarray, length: int) -> np.ndarray:
    """Interpolate node drops along one pixel line; shared pixels keep the
    worst drop and the ends clamp to the nearest node."""
    order = np.argsort(positions, kind="stable")
    pos_sorted = positions[order]
    drop_sorted = drops[order]
    uniq, start = np.unique(pos_sorted, return_index=True)
    agg = np.maximum.reduceat(drop_sorted, start)
    return np.interp(np.arange(length), uniq, agg)


def _fill_nan_interp_1d(line: np.ndarray) -> None:
    known = np.flatnonzero(~np.isnan(line))
    if known.size == 0 or known.size == line.size:
        return
    line[:] = np.interp(np.arange(line.size), known, line[known])


def hypothetical_drop_arrays(
    state: TopDownState,
    spec: GridSpec,
    n_layers: int | None = None,
    incremental: bool = False,
    diagnostics: list[str] | None = None,
) -> list[np.ndarray]:
    """Per-layer drop rasters as float64 arrays (index 0 = layer 1).

    Node drops scatter at their pixels (worst value wins a shared pixel),
    interpolate along each stripe's axis, then across stripes along the
    orthogonal axis; pixels outside the covered span clamp to the nearest
    filled value. With `incremental`, each layer reports only the drop it
    adds over the layer above instead of the cumulative drop from the pads.
    """
    diags = diagnostics if diagnostics is not None else []
    stripes = state.stripes
    vdd = state.vdd
    dbu = state.dbu_per_micron
    if n_layers is None:
        n_layers = max((s.layer for s in stripes), default=0)
    maps: list[np.ndarray] = []
    for layer in range(1, n_layers + 1):
        layer_stripes = [s for s in stripes if s.layer == layer]
        vals = np.full((spec.height, spec.width), np.nan)
        axes = [s.axis for s in layer_stripes if len(s) > 1]
        dominant = (
            Axis.HORIZONTAL
            if axes.count(Axis.HORIZONTAL) >= axes.count(Axis.VERTICAL)
            else Axis.VERTICAL
        )
        for s in layer_stripes:
            drops = np.array([vdd - state.voltages[node] for node in s.ordered_nodes])
            px = [spec.pixel_of_micron(*n.position_um(dbu)) for n in s.ordered_nodes]
            if len(s) == 1:
                col, row = px[0]
                vals[row, col] = np.fmax(vals[row, col], drops[0])
            elif s.axis is Axis.HORIZONTAL:
                row = px[0][1]
                cols = np.array([p[0] for p in px])
                vals[row, :] = np.fmax(vals[row, :], _line_values(cols, drops, spec.width))
            else:
                col = px[0][0]
                rows = np.array([p[1] for p in px])
                vals[:, col] = np.fmax(vals[:, col], _line_values(rows, drops, spec.height))
        if np.all(np.isnan(vals)):
            diags.append(f"layer {layer}: no nodes; hypothetical map zero-filled")
            maps.append(np.zeros((spec.height, spec.width)))
            continue
        if dominant is Axis.HORIZONTAL:
            for col in range(spec.width):
                _fill_nan_interp_1d(vals[:, col])
            for row in range(spec.height):
                _fill_nan_interp_1d(vals[row, :])
        else:
            for row in range(spec.height):
                _fill_nan_interp_1d(vals[row, :])
            for col in range(spec.width):
                _fill_nan_interp_1d(vals[:, col])
        np.nan_to_num(vals, copy=False)
        maps.append(np.clip(vals, 0.0, vdd))
    if incremental and len(maps) > 1:
        layered = []
        for i, m in enumerate(maps):
            if i + 1 < len(maps):
                layered.append(np.clip(m - maps[i + 1], 0.0, vdd))
            else:
                layered.append(m)
        maps = layered
    return maps


def hird_maps(
    state: TopDownState,
    spec: GridSpec,
    n_layers: int | None = None,
    incremental: bool = False,
    diagnostics: list[str] | None = None,
) -> list[ScalarGrid]:
    """Hypothetical IR-drop map per metal layer (index 0 = layer 1)."""
    arrays = hypothetical_drop_arrays(
        state, spec, n_layers=n_layers, incremental=incremental, diagnostics=diagnostics
    )
    return [ScalarGrid(a.astype(np.float32), units="volts") for a in arrays]


def distill(
    g: PdnGraph,
    spec: GridSpec | None = None,
    vdd: float | None = None,
    incremental: bool = False,
) -> tuple[list[ScalarGrid], TopDownState, list[str]]:
    """Run the full distillation; returns (maps, state, diagnostics)."""
    from .solver import grid_spec_for

    if spec is None:
        spec = grid_spec_for(g)
    bu = bottom_up_pass(g, vdd=vdd)
    state = top_down_pass(g, bu)
    diagnostics = list(bu.diagnostics) + list(state.diagnostics)
    n_layers = g.layers[-1] if g.layers else 0
    maps = hird_maps(
        state, spec, n_layers=n_layers, incremental=incremental, diagnostics=diagnostics
    )
    return maps, state, diagnostics
