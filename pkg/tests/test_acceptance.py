"""Desk-scale acceptance checks, one test per shipping criterion.

Each test states its tolerance inline; timing budgets are generous for CI
hardware but asserted, because the linear-time behaviour of the stripe
distillation is part of the contract, not an optimization.
"""

import json
import time

import numpy as np
import pytest

from irkit.cli import main as cli_main
from irkit.featurize import distance_transform_l1
from irkit.grids import GridSpec
from irkit.hird import (
    bottom_up_pass,
    hypothetical_drop_arrays,
    localized_solve,
    top_down_pass,
)
from irkit.metrics import evaluate, f1_hotspot, mae
from irkit.netlist import Axis, NodeId, Stripe
from irkit.pdngen import GenConfig, LayerSpec, generate
from irkit.solver import golden_ir_map, grid_spec_for, solve_graph

from oracles import brute_force_l1, dense_solve, dense_stripe_solve


def _grid_config(seed, width, height, pitches, pad_count=9, sink_count=40, **kw):
    sheets = [0.05, 0.03, 0.02, 0.015]
    layers = tuple(
        LayerSpec(i + 1, "h" if i % 2 == 0 else "v", p, sheets[i % 4])
        for i, p in enumerate(pitches)
    )
    return GenConfig(
        chip_width=width,
        chip_height=height,
        layers=layers,
        pad_count=pad_count,
        sink_count=sink_count,
        seed=seed,
        **kw,
    )


def test_dense_oracle_equivalence_50_small_pdns():
    # 50 generated PDNs <= 200 nodes; per-node agreement <= 1e-9 V; < 5 s total
    start = time.perf_counter()
    checked = 0
    for seed in range(50):
        cfg = _grid_config(
            seed, 24, 24, [4.0, 5.0], pad_count=2 + seed % 3, sink_count=4 + seed % 5
        )
        g = generate(cfg)
        assert len(g.nodes) <= 200
        v = solve_graph(g)
        ref = dense_solve(g)
        worst = max(abs(v[n] - ref[n]) for n in g.nodes)
        assert worst <= 1e-9, f"seed {seed}: |solve - dense| = {worst:.3e}"
        checked += 1
    elapsed = time.perf_counter() - start
    assert checked == 50
    assert elapsed < 5.0, f"dense-oracle sweep took {elapsed:.2f}s"


def test_residual_contract_20_medium_pdns():
    # 20 PDNs <= 5000 nodes; relative infinity-norm residual <= 1e-10; < 10 s
    start = time.perf_counter()
    for seed in range(20):
        cfg = _grid_config(
            seed,
            100,
            100,
            [3.0, 3.0, 12.0],
            pad_count=9,
            sink_count=60,
            irregularity=0.1 if seed % 2 else 0.0,
        )
        g = generate(cfg)
        assert len(g.nodes) <= 5000
        v = solve_graph(g)
        assert v.residual <= 1e-10, f"seed {seed}: residual {v.residual:.3e}"
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"residual sweep took {elapsed:.2f}s"


def test_stripe_exactness_1000_random_stripes():
    # localized_solve vs dense chain oracle: <= 1e-9 V per node,
    # pin-current conservation <= 1e-12 relative, 1000 random stripes
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        n = int(rng.integers(2, 51))
        resistances = rng.uniform(0.01, 10.0, n - 1)
        taps = rng.uniform(0.0, 0.010, n)
        taps[rng.random(n) < 0.3] = 0.0
        k = int(rng.integers(1, min(10, n) + 1))
        pin_idx = sorted(rng.choice(n, size=k, replace=False).tolist())
        pin_voltages = {p: 1.1 for p in pin_idx}
        nodes = tuple(NodeId(1, 1, 2000 * i, 0) for i in range(n))
        stripe = Stripe(
            layer=1,
            axis=Axis.HORIZONTAL,
            ordered_nodes=nodes,
            segment_resistances=tuple(resistances),
            taps=tuple(taps),
            pins=None,
        )
        sol = localized_solve(stripe, pin_voltages)
        ref_v, ref_i = dense_stripe_solve(resistances, taps, pin_voltages)
        worst = float(np.max(np.abs(sol.voltages - ref_v)))
        assert worst <= 1e-9, f"trial {trial}: voltage mismatch {worst:.3e}"
        total = taps.sum()
        injected = sum(sol.pin_currents.values())
        rel = abs(injected - total) / total if total else abs(injected)
        assert rel <= 1e-12, f"trial {trial}: conservation {rel:.3e}"


def test_hird_single_layer_matches_golden_at_node_pixels():
    # 20 single-layer PDNs: distilled map == golden map at node pixels <= 1e-8 V
    for seed in range(20):
        cfg = GenConfig(
            chip_width=50.0,
            chip_height=50.0,
            layers=(LayerSpec(1, "h", 5.0, 0.05),),
            pad_rule="stripe_ends",
            sink_count=10 + seed,
            seed=seed,
            node_pitch=4.0,
        )
        g = generate(cfg)
        spec = grid_spec_for(g, pixel_pitch=1.0)
        v = solve_graph(g)
        golden = golden_ir_map(v, g, spec)
        td = top_down_pass(g, bottom_up_pass(g))
        hird = hypothetical_drop_arrays(td, spec, n_layers=1)[0]
        for node in g.nodes:
            col, row = spec.pixel_of_micron(*node.position_um(g.dbu_per_micron))
            diff = abs(float(golden.values[row, col]) - hird[row, col])
            assert diff <= 1e-8, f"seed {seed} {node.name}: {diff:.3e}"


def test_global_conservation_20_multilayer_pdns():
    # anchored multi-layer grids: pad current == sink current <= 1e-10 relative
    for seed in range(20):
        layer_count = 2 + seed % 3
        pitches = [4.0, 6.0, 10.0, 16.0][:layer_count]
        cfg = _grid_config(seed, 60, 60, pitches, pad_count=4 + seed % 6,
                           sink_count=20 + seed)
        g = generate(cfg)
        bu = bottom_up_pass(g)
        assert not bu.diagnostics
        total_sink = g.total_sink_current
        rel = abs(bu.total_pad_current - total_sink) / total_sink
        assert rel <= 1e-10, f"seed {seed}: conservation {rel:.3e}"


def test_linearity_under_sink_scaling():
    # tripling every sink triples every map pixel within 1e-9 relative
    # (absolute floor 1e-12 V guards pixels whose drop is itself ~0)
    for seed in (3, 14):
        cfg = _grid_config(seed, 60, 60, [4.0, 6.0, 10.0], sink_count=30)
        g = generate(cfg)
        spec = grid_spec_for(g, 2.0)
        base = hypothetical_drop_arrays(
            top_down_pass(g, bottom_up_pass(g)), spec, n_layers=3
        )
        scaled_g = g.scale_sinks(3.0)
        scaled = hypothetical_drop_arrays(
            top_down_pass(scaled_g, bottom_up_pass(scaled_g)), spec, n_layers=3
        )
        for a, b in zip(base, scaled):
            bound = 1e-9 * np.maximum(3.0 * np.abs(a), 1e-12)
            worst = float(np.max(np.abs(b - 3.0 * a) - bound))
            assert worst <= 0.0, f"seed {seed}: linearity violated by {worst:.3e}"


def test_distance_transform_matches_brute_force():
    # 50 random 64x64 occupancy grids, exact equality in pixel units
    rng = np.random.default_rng(7)
    for trial in range(50):
        density = rng.uniform(0.0, 0.25)
        occ = rng.random((64, 64)) < density
        fast = distance_transform_l1(occ)
        slow = brute_force_l1(occ)
        np.testing.assert_array_equal(fast, slow, err_msg=f"trial {trial}")


def test_metric_fixtures_exact():
    assert mae([1.0, 2.0, 3.0], [1.0, 3.0, 5.0]) == 1.0
    gold = np.zeros(20)
    gold[:10] = 10.0
    pred = np.zeros(20)
    pred[:8] = 10.0
    pred[10:12] = 10.0
    f1, tp, fp, fn, _ = f1_hotspot(pred, gold)
    assert (tp, fp, fn) == (8, 2, 2)
    assert f1 == 0.8
    x = np.array([1.0, 2.0, 5.0])
    report = evaluate(x, x)
    assert (report.e_avg_mv, report.e_max_mv, report.f1) == (0.0, 0.0, 1.0)


PIPELINE_CONFIG = """\
chip_width = 160
chip_height = 160
layers = 1:h:2.5:0.05 ; 2:v:2.5:0.03 ; 3:h:10:0.02
pad_rule = grid
pad_count = 16
sink_count = 200
seed = 0
"""


def test_end_to_end_pipeline_10k_nodes(tmp_path):
    # full gen -> solve -> featurize -> eval on ~10k nodes in < 10 s,
    # emitting the declared file set; warm rerun must skip featurization
    cfg_path = tmp_path / "pipe.cfg"
    cfg_path.write_text(PIPELINE_CONFIG)
    out = tmp_path / "run"

    g = generate(
        _grid_config(0, 160, 160, [2.5, 2.5, 10.0], pad_count=16, sink_count=200)
    )
    assert 8000 <= len(g.nodes) <= 12000

    start = time.perf_counter()
    rc = cli_main(
        ["pipeline", str(cfg_path), "--out", str(out), "--pitch", "2.5"]
    )
    elapsed = time.perf_counter() - start
    assert rc == 0
    assert elapsed < 10.0, f"pipeline took {elapsed:.2f}s"

    for name in (
        "netlist.sp",
        "golden.sgrd",
        "golden.csv",
        "golden.pgm",
        "eval.json",
        "run_manifest.json",
    ):
        assert (out / name).exists(), name
    features = sorted((out / "features").glob("netlist_*.sgrd"))
    assert len(features) == 4 * 3 + 3
    assert (out / "features" / "netlist_manifest.csv").exists()

    stamps = {p: p.stat().st_mtime_ns for p in features}
    rc = cli_main(["pipeline", str(cfg_path), "--out", str(out), "--pitch", "2.5"])
    assert rc == 0
    for p, stamp in stamps.items():
        assert p.stat().st_mtime_ns == stamp, f"{p.name} recomputed on warm cache"
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["flags"]["cache_hit"] is True


def test_distillation_time_scales_linearly():
    # wall time per bottom-up + top-down pass grows <= 2.5x when the node
    # count doubles, across 4 doublings (best of 3 runs each)
    sizes = [(40, 40), (80, 40), (80, 80), (160, 80), (160, 160)]
    times = []
    counts = []
    for w, h in sizes:
        cfg = _grid_config(1, w, h, [2.0, 2.0], pad_count=9, sink_count=50)
        g = generate(cfg)
        counts.append(len(g.nodes))
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            td = top_down_pass(g, bottom_up_pass(g))
            best = min(best, time.perf_counter() - t0)
        assert td.voltages
        times.append(best)
    for i in range(4):
        assert counts[i + 1] == pytest.approx(2 * counts[i], rel=0.1)
        ratio = times[i + 1] / times[i]
        assert ratio <= 2.5, (
            f"doubling {counts[i]} -> {counts[i + 1]} nodes "
            f"grew wall time {ratio:.2f}x (times: {times})"
        )
