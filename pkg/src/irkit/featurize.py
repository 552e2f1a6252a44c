"""Rasterized input features for IR-drop estimation models.

All maps share one GridSpec. Canonical channel order for a stack over L
metal layers:

    pdn_density, eff_distance, [current], wire_R_m1..mL, via_C_1..L,
    rdist_m1..mL, rdist_via, hird_m1..mL

The current map is optional (off by default). Exported stacks write one
grid file per channel plus a manifest of `name,file,mean,std` lines; the
stored statistics are the per-channel z-score parameters computed at native
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import GridSpec, ScalarGrid, bilinear_resize, read_grid, write_csv, write_sgrd
from .netlist import EdgeKind, PdnGraph, extract_stripes

STD_FLOOR = 1e-12


class FeatureError(ValueError):
    pass


def _pixels_of(g: PdnGraph, spec: GridSpec, nodes) -> tuple[np.ndarray, np.ndarray]:
    dbu = g.dbu_per_micron
    xs = np.array([n.x for n in nodes], dtype=np.float64) / dbu
    ys = np.array([n.y for n in nodes], dtype=np.float64) / dbu
    cols = np.clip((xs / spec.pixel_pitch).astype(np.int64), 0, spec.width - 1)
    rows = np.clip((ys / spec.pixel_pitch).astype(np.int64), 0, spec.height - 1)
    return rows, cols


def current_map(g: PdnGraph, spec: GridSpec) -> ScalarGrid:
    """Per-pixel sum of sink currents (amperes)."""
    values = np.zeros((spec.height, spec.width))
    if g.sinks:
        nodes = [s.node for s in g.sinks]
        rows, cols = _pixels_of(g, spec, nodes)
        np.add.at(values, (rows, cols), [s.current for s in g.sinks])
    return ScalarGrid(values.astype(np.float32), units="amperes")


def effective_distance_map(g: PdnGraph, spec: GridSpec) -> ScalarGrid:
    """Harmonic combination of Euclidean distances to every pad (microns).

    d_eff = (sum_i 1/d_i)^-1 with each d_i clamped below at half a pixel,
    so d_eff never exceeds the distance to the closest pad.
    """
    if not g.pads:
        raise FeatureError("effective distance needs at least one pad")
    dbu = g.dbu_per_micron
    cx = spec.centers_x()
    cy = spec.centers_y()
    floor = spec.pixel_pitch / 2.0
    acc = np.zeros((spec.height, spec.width))
    for node in sorted(g.pad_nodes):
        px, py = node.x / dbu, node.y / dbu
        d = np.hypot(cx[None, :] - px, cy[:, None] - py)
        np.maximum(d, floor, out=d)
        acc += 1.0 / d
    return ScalarGrid((1.0 / acc).astype(np.float32), units="microns")


def _stripe_span_pixels(g: PdnGraph, spec: GridSpec, stripe) -> tuple:
    """(row_slice, col_slice) covered by the stripe's centerline."""
    dbu = g.dbu_per_micron
    first, last = stripe.ordered_nodes[0], stripe.ordered_nodes[-1]
    c0, r0 = spec.pixel_of_micron(*first.position_um(dbu))
    c1, r1 = spec.pixel_of_micron(*last.position_um(dbu))
    return slice(min(r0, r1), max(r0, r1) + 1), slice(min(c0, c1), max(c0, c1) + 1)


def pdn_density_map(g: PdnGraph, spec: GridSpec) -> ScalarGrid:
    """Stripe-crossing count per pixel, normalized by the grid maximum."""
    counts = np.zeros((spec.height, spec.width))
    for stripe in extract_stripes(g):
        if len(stripe) < 2:
            continue
        rows, cols = _stripe_span_pixels(g, spec, stripe)
        counts[rows, cols] += 1.0
    top = counts.max()
    if top > 0:
        counts /= top
    return ScalarGrid(counts.astype(np.float32), units="dimensionless")


def wire_resistance_maps(g: PdnGraph, spec: GridSpec) -> list[ScalarGrid]:
    """Per-layer resistance density (ohms/micron) painted along each wire.

    Overlapping spans keep the worst (maximum) density.
    """
    n_layers = g.layers[-1] if g.layers else 0
    dbu = g.dbu_per_micron
    maps = [np.zeros((spec.height, spec.width)) for _ in range(n_layers)]
    for e in g.edges:
        if e.kind is not EdgeKind.WIRE:
            continue
        length_um = (abs(e.a.x - e.b.x) + abs(e.a.y - e.b.y)) / dbu
        density = e.resistance / length_um
        c0, r0 = spec.pixel_of_micron(*e.a.position_um(dbu))
        c1, r1 = spec.pixel_of_micron(*e.b.position_um(dbu))
        rows = slice(min(r0, r1), max(r0, r1) + 1)
        cols = slice(min(c0, c1), max(c0, c1) + 1)
        target = maps[e.a.layer - 1]
        np.maximum(target[rows, cols], density, out=target[rows, cols])
    return [ScalarGrid(m.astype(np.float32), units="ohms_per_micron") for m in maps]


def via_conductance_maps(g: PdnGraph, spec: GridSpec) -> list[ScalarGrid]:
    """Per-pixel summed via conductance (siemens), indexed by the via's
    lower layer; absence of a via is a meaningful zero. The top layer has
    no upward via, so its map stays empty."""
    n_layers = g.layers[-1] if g.layers else 0
    maps = [np.zeros((spec.height, spec.width)) for _ in range(n_layers)]
    dbu = g.dbu_per_micron
    for e in g.edges:
        if e.kind is not EdgeKind.VIA:
            continue
        lower = min(e.a.layer, e.b.layer)
        col, row = spec.pixel_of_micron(e.a.x / dbu, e.a.y / dbu)
        maps[lower - 1][row, col] += 1.0 / e.resistance
    return [ScalarGrid(m.astype(np.float32), units="siemens") for m in maps]


def distance_transform_l1(occupied: np.ndarray, pixel_pitch: float = 1.0) -> np.ndarray:
    """Exact L1 distance (microns) from each pixel to the nearest occupied
    pixel, by the separable two-pass recurrence. A fully empty grid returns
    the sentinel (width + height) * pitch everywhere."""
    occ = np.asarray(occupied, dtype=bool)
    h, w = occ.shape
    inf = w + h
    d = np.where(occ, 0, inf).astype(np.int64)

    cols = np.arange(w)
    left = np.minimum.accumulate(d - cols, axis=1) + cols
    right = np.minimum.accumulate((d + cols)[:, ::-1], axis=1)[:, ::-1] - cols
    d = np.minimum(left, right)

    rows = np.arange(h)[:, None]
    up = np.minimum.accumulate(d - rows, axis=0) + rows
    down = np.minimum.accumulate((d + rows)[::-1, :], axis=0)[::-1, :] - rows
    d = np.minimum(up, down)

    return np.minimum(d, inf).astype(np.float64) * pixel_pitch


def _wire_occupancy(g: PdnGraph, spec: GridSpec) -> list[np.ndarray]:
    n_layers = g.layers[-1] if g.layers else 0
    dbu = g.dbu_per_micron
    occ = [np.zeros((spec.height, spec.width), dtype=bool) for _ in range(n_layers)]
    for e in g.edges:
        if e.kind is not EdgeKind.WIRE:
            continue
        c0, r0 = spec.pixel_of_micron(*e.a.position_um(dbu))
        c1, r1 = spec.pixel_of_micron(*e.b.position_um(dbu))
        occ[e.a.layer - 1][
            min(r0, r1) : max(r0, r1) + 1, min(c0, c1) : max(c0, c1) + 1
        ] = True
    return occ


def resistive_distance_maps(
    g: PdnGraph, spec: GridSpec, diagnostics: list[str] | None = None
) -> tuple[list[ScalarGrid], ScalarGrid]:
    """L1 distance (microns) to the nearest wire pixel, per layer, plus the
    distance to the nearest via pixel across all layers."""
    diags = diagnostics if diagnostics is not None else []
    layer_maps = []
    for layer_index, occ in enumerate(_wire_occupancy(g, spec), start=1):
        if not occ.any():
            diags.append(f"layer {layer_index}: no wires; distance map is sentinel")
        dist = distance_transform_l1(occ, spec.pixel_pitch)
        layer_maps.append(ScalarGrid(dist.astype(np.float32), units="microns"))

    via_occ = np.zeros((spec.height, spec.width), dtype=bool)
    dbu = g.dbu_per_micron
    for e in g.edges:
        if e.kind is EdgeKind.VIA:
            col, row = spec.pixel_of_micron(e.a.x / dbu, e.a.y / dbu)
            via_occ[row, col] = True
    if not via_occ.any():
        diags.append("no vias; via distance map is sentinel")
    via_map = ScalarGrid(
        distance_transform_l1(via_occ, spec.pixel_pitch).astype(np.float32),
        units="microns",
    )
    return layer_maps, via_map


@dataclass(frozen=True)
class FeatureStack:
    """Ordered (name, grid) channels with per-channel z-score statistics."""

    channels: tuple[tuple[str, ScalarGrid], ...]
    stats: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.channels) != len(self.stats):
            raise FeatureError("one (mean, std) pair per channel required")
        shapes = {grid.values.shape for _, grid in self.channels}
        if len(shapes) > 1:
            raise FeatureError(f"channels disagree on shape: {sorted(shapes)}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.channels)

    def grid(self, name: str) -> ScalarGrid:
        for n, g in self.channels:
            if n == name:
                return g
        raise KeyError(name)

    def __len__(self) -> int:
        return len(self.channels)

    def zscored(self) -> np.ndarray:
        """(C, H, W) float32 array of normalized channels."""
        out = []
        for (_, grid), (mean, std) in zip(self.channels, self.stats):
            out.append(((grid.values.astype(np.float64) - mean) / std).astype(np.float32))
        return np.stack(out)

    def export(
        self,
        out_dir: str | Path,
        stem: str = "features",
        fmt: str = "sgrd",
        size: tuple[int, int] | None = None,
    ) -> Path:
        """Write one grid file per channel plus the manifest; returns the
        manifest path. `size=(width, height)` resizes bilinearly on the way
        out while the manifest keeps the native-resolution statistics."""
        if fmt not in ("sgrd", "csv"):
            raise FeatureError(f"unknown export format {fmt!r}")
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = []
        for (name, grid), (mean, std) in zip(self.channels, self.stats):
            if size is not None:
                grid = bilinear_resize(grid, size[0], size[1])
            filename = f"{stem}_{name}.{fmt}"
            if fmt == "sgrd":
                write_sgrd(grid, out_dir / filename)
            else:
                write_csv(grid, out_dir / filename)
            lines.append(f"{name},{filename},{mean!r},{std!r}")
        manifest = out_dir / f"{stem}_manifest.csv"
        manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return manifest


def load_feature_stack(manifest_path: str | Path) -> FeatureStack:
    manifest_path = Path(manifest_path)
    channels = []
    stats = []
    for line in manifest_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        name, filename, mean, std = line.split(",")
        channels.append((name, read_grid(manifest_path.parent / filename)))
        stats.append((float(mean), float(std)))
    return FeatureStack(tuple(channels), tuple(stats))


def _zstats(grid: ScalarGrid) -> tuple[float, float]:
    v = grid.values.astype(np.float64)
    return float(v.mean()), float(max(v.std(), STD_FLOOR))


def assemble_features(
    g: PdnGraph,
    spec: GridSpec,
    hypothetical: list[ScalarGrid],
    include_current: bool = False,
    diagnostics: list[str] | None = None,
) -> FeatureStack:
    """Build the full input stack in canonical channel order.

    `hypothetical` supplies the per-layer distilled drop maps (layer 1
    first). For L layers the stack holds 4L + 3 channels, one more when the
    current map is included.
    """
    n_layers = g.layers[-1] if g.layers else 0
    if len(hypothetical) != n_layers:
        raise FeatureError(
            f"expected {n_layers} hypothetical maps, got {len(hypothetical)}"
        )
    channels: list[tuple[str, ScalarGrid]] = [
        ("pdn_density", pdn_density_map(g, spec)),
        ("eff_distance", effective_distance_map(g, spec)),
    ]
    if include_current:
        channels.append(("current", current_map(g, spec)))
    for i, grid in enumerate(wire_resistance_maps(g, spec), start=1):
        channels.append((f"wire_R_m{i}", grid))
    for i, grid in enumerate(via_conductance_maps(g, spec), start=1):
        channels.append((f"via_C_{i}", grid))
    layer_dists, via_dist = resistive_distance_maps(g, spec, diagnostics)
    for i, grid in enumerate(layer_dists, start=1):
        channels.append((f"rdist_m{i}", grid))
    channels.append(("rdist_via", via_dist))
    for i, grid in enumerate(hypothetical, start=1):
        channels.append((f"hird_m{i}", grid))

    for name, grid in channels:
        if grid.values.shape != (spec.height, spec.width):
            raise FeatureError(f"channel {name} does not match the grid spec")
    stats = tuple(_zstats(grid) for _, grid in channels)
    return FeatureStack(tuple(channels), stats)
