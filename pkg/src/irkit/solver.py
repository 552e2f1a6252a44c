"""Exact static solve of the conductance system G V = J.

Pads are eliminated by Dirichlet fold-in (their 1/R couplings move to the
right-hand side), which keeps G symmetric positive-definite. Sinks subtract
their current from J. The solve contract is the relative residual
max-norm(G V - J) / max-norm(J) <= rel_tol, enforced by iterative
refinement on top of a sparse LU factorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .grids import GridSpec, ScalarGrid
from .netlist import NodeId, PdnGraph, _UnionFind

DEFAULT_REL_TOL = 1e-10


class SolverError(RuntimeError):
    pass


class NoPadError(SolverError):
    pass


class SingularSystemError(SolverError):
    pass


@dataclass(frozen=True)
class ConductanceSystem:
    """Reduced nodal system over non-pad, non-floating nodes.

    `floating` holds nodes in components with neither pad nor sink; they
    carry no current and sit at vdd by convention.
    """

    unknown_index: dict[NodeId, int]
    G: sp.csr_matrix
    J: np.ndarray
    vdd: float
    pad_nodes: frozenset[NodeId]
    floating: frozenset[NodeId]

    @property
    def dimension(self) -> int:
        return len(self.unknown_index)


@dataclass(frozen=True)
class NodeVoltages:
    volts: dict[NodeId, float]
    vdd: float
    residual: float

    def __getitem__(self, node: NodeId) -> float:
        return self.volts[node]

    def __contains__(self, node: NodeId) -> bool:
        return node in self.volts

    def items(self):
        return self.volts.items()

    def drop(self, node: NodeId) -> float:
        return self.vdd - self.volts[node]


def build_system(g: PdnGraph, vdd: float | None = None) -> ConductanceSystem:
    """Stamp the nodal system with pads folded into J.

    Raises NoPadError when the graph has no pad and SingularSystemError when
    a component carries sink current but no pad (its voltages are undefined).
    """
    if not g.pads:
        raise NoPadError("graph has no voltage source; nothing pins the system")
    if vdd is None:
        vdd = g.vdd

    uf = _UnionFind()
    for e in g.edges:
        uf.union(e.a, e.b)
    pad_roots = {uf.find(p) for p in g.pad_nodes}
    sink_current = g.sink_current
    floating: set[NodeId] = set()
    for n in g.nodes:
        if uf.find(n) in pad_roots:
            continue
        if sink_current.get(n, 0.0) > 0.0:
            raise SingularSystemError(
                f"sink at {n.name} has no resistive path to any pad"
            )
        floating.add(n)

    unknowns = sorted(g.nodes - g.pad_nodes - floating)
    index = {n: i for i, n in enumerate(unknowns)}
    n_unknown = len(unknowns)

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    J = np.zeros(n_unknown)
    pad_set = g.pad_nodes
    for e in g.edges:
        cond = 1.0 / e.resistance
        a_pad, b_pad = e.a in pad_set, e.b in pad_set
        if a_pad and b_pad:
            continue
        if e.a in floating:  # whole component floats; nothing to stamp
            continue
        if a_pad or b_pad:
            inner = index[e.b if a_pad else e.a]
            rows.append(inner)
            cols.append(inner)
            vals.append(cond)
            J[inner] += cond * vdd
        else:
            i, j = index[e.a], index[e.b]
            rows += [i, j, i, j]
            cols += [i, j, j, i]
            vals += [cond, cond, -cond, -cond]
    for node, current in sink_current.items():
        if node in index:
            J[index[node]] -= current

    G = sp.coo_matrix(
        (np.asarray(vals), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(n_unknown, n_unknown),
    ).tocsr()
    return ConductanceSystem(index, G, J, float(vdd), g.pad_nodes, frozenset(floating))


def solve_exact(
    system: ConductanceSystem, rel_tol: float = DEFAULT_REL_TOL
) -> NodeVoltages:
    """Direct sparse solve with iterative refinement to the residual contract."""
    if rel_tol <= 0:
        raise ValueError(f"rel_tol must be positive, got {rel_tol}")
    volts: dict[NodeId, float] = {}
    for p in system.pad_nodes:
        volts[p] = system.vdd
    for f in system.floating:
        volts[f] = system.vdd

    n = system.dimension
    if n == 0:
        return NodeVoltages(volts, system.vdd, 0.0)

    G, J = system.G, system.J
    denom = float(np.max(np.abs(J)))
    if denom == 0.0:
        denom = 1.0
    try:
        lu = spla.splu(G.tocsc())
    except RuntimeError as exc:
        raise SingularSystemError(f"factorization failed: {exc}") from None
    x = lu.solve(J)
    residual = float(np.max(np.abs(J - G @ x))) / denom
    for _ in range(8):
        if residual <= rel_tol:
            break
        r = J - G @ x
        x = x + lu.solve(r)
        residual = float(np.max(np.abs(J - G @ x))) / denom
    if not math.isfinite(residual) or residual > rel_tol:
        raise SolverError(
            f"solve did not reach rel_tol={rel_tol:g}; achieved residual {residual:g}"
        )
    for node, i in system.unknown_index.items():
        volts[node] = float(x[i])
    return NodeVoltages(volts, system.vdd, residual)


def solve_graph(
    g: PdnGraph, vdd: float | None = None, rel_tol: float = DEFAULT_REL_TOL
) -> NodeVoltages:
    return solve_exact(build_system(g, vdd=vdd), rel_tol=rel_tol)


def grid_spec_for(
    g: PdnGraph,
    pixel_pitch: float = 1.0,
    width: int | None = None,
    height: int | None = None,
) -> GridSpec:
    """Raster covering the node extent at the requested pitch."""
    _, _, max_x, max_y = g.extent
    dbu = g.dbu_per_micron
    if width is None:
        width = int(max_x / dbu / pixel_pitch) + 1
    if height is None:
        height = int(max_y / dbu / pixel_pitch) + 1
    return GridSpec(pixel_pitch, max(width, 1), max(height, 1))


def _nearest_fill(
    values: np.ndarray,
    covered: np.ndarray,
    node_xy: np.ndarray,
    node_values: np.ndarray,
    spec: GridSpec,
) -> None:
    """Fill uncovered pixels with the value of the L1-nearest node.

    Node arrays must be sorted by node id: equal-distance ties resolve to
    the lowest index, hence the lowest id.
    """
    empty_rows, empty_cols = np.nonzero(~covered)
    if empty_rows.size == 0:
        return
    centers = np.column_stack(
        [
            (empty_cols + 0.5) * spec.pixel_pitch,
            (empty_rows + 0.5) * spec.pixel_pitch,
        ]
    )
    tree = cKDTree(node_xy)
    n_nodes = node_xy.shape[0]
    tol = 1e-9
    k = min(4, n_nodes)
    while True:
        dists, idx = tree.query(centers, k=k, p=1)
        dists = np.atleast_2d(dists.reshape(len(centers), -1))
        idx = np.atleast_2d(idx.reshape(len(centers), -1))
        if k == n_nodes or not np.any(dists[:, -1] <= dists[:, 0] + tol):
            break
        k = min(k * 2, n_nodes)
    tied = dists <= dists[:, :1] + tol
    choice = np.where(tied, idx, n_nodes).min(axis=1)
    values[empty_rows, empty_cols] = node_values[choice]


def golden_ir_map(
    voltages: NodeVoltages,
    g: PdnGraph,
    spec: GridSpec | None = None,
    layer: int = 1,
) -> ScalarGrid:
    """Ground-truth IR-drop raster from exact node voltages.

    Each pixel takes the worst (maximum) drop among observation-layer
    nodes inside it; pixels without one copy the L1-nearest node's value.
    """
    if spec is None:
        spec = grid_spec_for(g)
    observed = sorted(n for n in g.nodes if n.layer == layer)
    if not observed:
        raise SolverError(f"graph has no layer-{layer} nodes; cannot rasterize IR drop")
    dbu = g.dbu_per_micron
    xs = np.array([n.x for n in observed]) / dbu
    ys = np.array([n.y for n in observed]) / dbu
    drops = np.array([voltages.vdd - voltages[n] for n in observed])

    cols = np.clip((xs / spec.pixel_pitch).astype(np.int64), 0, spec.width - 1)
    rows = np.clip((ys / spec.pixel_pitch).astype(np.int64), 0, spec.height - 1)
    values = np.full((spec.height, spec.width), -np.inf)
    np.maximum.at(values, (rows, cols), drops)
    covered = values > -np.inf
    values[~covered] = 0.0
    _nearest_fill(values, covered, np.column_stack([xs, ys]), drops, spec)
    return ScalarGrid(values.astype(np.float32), units="volts")
