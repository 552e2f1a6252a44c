"""Command-line pipeline around the library.

Subcommands: gen (synthesize a netlist), solve (golden IR-drop map),
featurize (distillation + feature stack export), eval (benchmark metrics),
and pipeline (gen -> solve -> featurize -> eval in one run). Feature
extraction caches on the content hash of its inputs, so reruns with
unchanged inputs touch nothing; IRKIT_CACHE_DIR relocates the cache.

Exit codes: 0 success, 1 input/parse failure, 2 bad generator config,
3 unsolvable system (no pads / disconnected sinks), 4 evaluation mismatch.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_SOLVE = 3
EXIT_EVAL = 4

FEATURE_VERSION = "1"  # bump to invalidate cached feature stacks


@dataclass
class RunManifest:
    """What a command consumed and produced, with per-stage wall seconds."""

    command: str
    inputs: dict
    pixel_pitch: float
    vdd: float | None
    flags: dict
    out_dir: str
    outputs: list[str] = field(default_factory=list)
    stage_seconds: dict = field(default_factory=dict)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pitch", type=float, default=1.0, help="microns per pixel")
    common.add_argument(
        "--vdd",
        type=float,
        default=None,
        help="supply voltage; defaults to the netlist's pad voltage (1.1 V fallback)",
    )
    common.add_argument("--threads", type=int, default=None, help="BLAS thread cap")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument(
        "--dbu", type=int, default=2000, help="database units per micron"
    )

    parser = argparse.ArgumentParser(
        prog="irkit",
        description="power-grid IR-drop toolkit: generate, solve, featurize, evaluate",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="synthesize a netlist")
    p.add_argument("config", type=Path, help="key=value generator config")
    p.add_argument("--netlist-name", default="pdn.sp")

    p = sub.add_parser("solve", parents=[common], help="golden IR-drop map")
    p.add_argument("netlist", type=Path)

    p = sub.add_parser("featurize", parents=[common], help="export feature stack")
    p.add_argument("netlist", type=Path)
    p.add_argument("--include-current", action="store_true")
    p.add_argument(
        "--incremental",
        action="store_true",
        help="per-layer drop deltas instead of cumulative drops",
    )
    p.add_argument(
        "--size", type=int, nargs=2, metavar=("W", "H"), default=None,
        help="bilinear-resize exported channels",
    )
    p.add_argument("--format", choices=("sgrd", "csv"), default="sgrd")

    p = sub.add_parser("eval", parents=[common], help="metrics for pred vs golden")
    p.add_argument("pred", type=Path, help="grid file, or directory for batch mode")
    p.add_argument("gold", type=Path, help="grid file, or directory for batch mode")
    p.add_argument("--runtime", type=float, default=0.0, help="seconds to report")

    p = sub.add_parser(
        "pipeline", parents=[common], help="gen, solve, featurize, eval in one run"
    )
    p.add_argument("config", type=Path)
    p.add_argument("--include-current", action="store_true")
    p.add_argument("--incremental", action="store_true")
    return parser


def _apply_threads(n: int | None) -> None:
    if n is None:
        return
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ[var] = str(n)


def _load_graph(path: Path, dbu: int):
    from .netlist import parse_netlist

    g = parse_netlist(path.read_text(encoding="utf-8"), dbu_per_micron=dbu)
    nets = sorted({n.net for n in g.nodes})
    if len(nets) > 1:
        print(f"netlist has nets {nets}; analyzing net 1 only", file=sys.stderr)
        g = g.restrict_to_net(1)
    return g


def cmd_gen(args) -> int:
    from .netlist import serialize_netlist
    from .pdngen import generate, parse_gen_config

    t0 = time.perf_counter()
    cfg = parse_gen_config(args.config.read_text(encoding="utf-8"))
    graph = generate(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    netlist_path = args.out / args.netlist_name
    netlist_path.write_text(serialize_netlist(graph), encoding="utf-8")
    manifest = RunManifest(
        command="gen",
        inputs={"config": str(args.config)},
        pixel_pitch=args.pitch,
        vdd=cfg.vdd,
        flags={"seed": cfg.seed},
        out_dir=str(args.out),
        outputs=[str(netlist_path)],
        stage_seconds={"gen": time.perf_counter() - t0},
    )
    manifest.write(args.out / "run_manifest.json")
    print(f"wrote {netlist_path} ({len(graph.nodes)} nodes)")
    return EXIT_OK


def cmd_solve(args) -> int:
    from .grids import write_csv, write_pgm, write_sgrd
    from .solver import build_system, golden_ir_map, grid_spec_for, solve_exact

    graph = _load_graph(args.netlist, args.dbu)
    stage_seconds = {}
    t0 = time.perf_counter()
    system = build_system(graph, vdd=args.vdd)
    voltages = solve_exact(system)
    stage_seconds["solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    spec = grid_spec_for(graph, args.pitch)
    golden = golden_ir_map(voltages, graph, spec)
    args.out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for writer, suffix in ((write_sgrd, ".sgrd"), (write_csv, ".csv"), (write_pgm, ".pgm")):
        path = args.out / f"golden{suffix}"
        writer(golden, path)
        outputs.append(str(path))
    stage_seconds["rasterize"] = time.perf_counter() - t0

    manifest = RunManifest(
        command="solve",
        inputs={"netlist": str(args.netlist)},
        pixel_pitch=args.pitch,
        vdd=system.vdd,
        flags={},
        out_dir=str(args.out),
        outputs=outputs,
        stage_seconds=stage_seconds,
    )
    manifest.write(args.out / "run_manifest.json")
    worst = float(golden.values.max()) * 1000.0
    print(
        f"solved {system.dimension} unknowns, residual {voltages.residual:.3e}, "
        f"worst drop {worst:.4f} mV"
    )
    return EXIT_OK


def _cache_dir(out_dir: Path) -> Path:
    env = os.environ.get("IRKIT_CACHE_DIR")
    return Path(env) if env else out_dir / ".irkit_cache"


def _featurize_run(
    netlist_path: Path,
    out_dir: Path,
    pitch: float,
    vdd: float | None,
    dbu: int,
    include_current: bool,
    incremental: bool,
    size,
    fmt: str,
) -> tuple[Path, bool, float]:
    """Returns (manifest_path, cache_hit, seconds)."""
    t0 = time.perf_counter()
    netlist_bytes = netlist_path.read_bytes()
    key_src = json.dumps(
        {
            "netlist": hashlib.sha256(netlist_bytes).hexdigest(),
            "pitch": pitch,
            "vdd": vdd,
            "dbu": dbu,
            "include_current": include_current,
            "incremental": incremental,
            "size": list(size) if size else None,
            "fmt": fmt,
            "version": FEATURE_VERSION,
        },
        sort_keys=True,
    )
    key = hashlib.sha256(key_src.encode()).hexdigest()
    cache_dir = _cache_dir(out_dir)
    marker = cache_dir / f"{key}.json"
    if marker.exists():
        recorded = json.loads(marker.read_text(encoding="utf-8"))
        paths = [Path(p) for p in recorded["outputs"]]
        if paths and all(p.exists() for p in paths):
            return Path(recorded["manifest"]), True, time.perf_counter() - t0

    from .featurize import assemble_features
    from .hird import distill
    from .netlist import parse_netlist
    from .solver import grid_spec_for

    g = parse_netlist(netlist_bytes.decode("utf-8"), dbu_per_micron=dbu)
    nets = sorted({n.net for n in g.nodes})
    if len(nets) > 1:
        g = g.restrict_to_net(1)
    spec = grid_spec_for(g, pitch)
    maps, _, diagnostics = distill(g, spec, vdd=vdd, incremental=incremental)
    for line in diagnostics:
        print(f"featurize: {line}", file=sys.stderr)
    stack = assemble_features(g, spec, maps, include_current=include_current)
    stem = netlist_path.stem
    manifest = stack.export(out_dir, stem=stem, fmt=fmt, size=tuple(size) if size else None)
    outputs = [str(out_dir / f"{stem}_{name}.{fmt}") for name in stack.names]
    outputs.append(str(manifest))
    cache_dir.mkdir(parents=True, exist_ok=True)
    marker.write_text(
        json.dumps({"manifest": str(manifest), "outputs": outputs}) + "\n",
        encoding="utf-8",
    )
    return manifest, False, time.perf_counter() - t0


def cmd_featurize(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    manifest, hit, seconds = _featurize_run(
        args.netlist,
        args.out,
        args.pitch,
        args.vdd,
        args.dbu,
        args.include_current,
        args.incremental,
        args.size,
        args.format,
    )
    run = RunManifest(
        command="featurize",
        inputs={"netlist": str(args.netlist)},
        pixel_pitch=args.pitch,
        vdd=args.vdd,
        flags={
            "include_current": args.include_current,
            "incremental": args.incremental,
            "cache_hit": hit,
        },
        out_dir=str(args.out),
        outputs=[str(manifest)],
        stage_seconds={"featurize": seconds},
    )
    run.write(args.out / "run_manifest.json")
    print(f"{'cache hit, kept' if hit else 'wrote'} {manifest}")
    return EXIT_OK


def _eval_pair(pred_path: Path, gold_path: Path, runtime: float):
    from .grids import read_grid
    from .metrics import evaluate

    return evaluate(read_grid(pred_path), read_grid(gold_path), runtime)


def cmd_eval(args) -> int:
    from .metrics import EvalReport

    if args.pred.is_dir() and args.gold.is_dir():
        names = sorted(
            p.name
            for p in args.pred.iterdir()
            if p.suffix in (".sgrd", ".csv") and (args.gold / p.name).exists()
        )
        print(EvalReport.CSV_HEADER)
        for name in names:
            report = _eval_pair(args.pred / name, args.gold / name, args.runtime)
            print(report.csv_row(name, name))
        return EXIT_OK
    report = _eval_pair(args.pred, args.gold, args.runtime)
    print(report.to_json())
    return EXIT_OK


def cmd_pipeline(args) -> int:
    from .grids import write_csv, write_pgm, write_sgrd
    from .netlist import parse_netlist, serialize_netlist
    from .pdngen import generate, parse_gen_config
    from .solver import build_system, golden_ir_map, grid_spec_for, solve_exact

    stage_seconds: dict[str, float] = {}
    outputs: list[str] = []
    args.out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    cfg = parse_gen_config(args.config.read_text(encoding="utf-8"))
    graph = generate(cfg)
    netlist_path = args.out / "netlist.sp"
    netlist_path.write_text(serialize_netlist(graph), encoding="utf-8")
    outputs.append(str(netlist_path))
    stage_seconds["gen"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    system = build_system(graph, vdd=args.vdd)
    voltages = solve_exact(system)
    spec = grid_spec_for(graph, args.pitch)
    golden = golden_ir_map(voltages, graph, spec, layer=cfg.layers[0].index)
    for writer, suffix in ((write_sgrd, ".sgrd"), (write_csv, ".csv"), (write_pgm, ".pgm")):
        path = args.out / f"golden{suffix}"
        writer(golden, path)
        outputs.append(str(path))
    stage_seconds["solve"] = time.perf_counter() - t0

    features_dir = args.out / "features"
    features_dir.mkdir(parents=True, exist_ok=True)
    manifest, hit, seconds = _featurize_run(
        netlist_path,
        features_dir,
        args.pitch,
        args.vdd,
        args.dbu,
        args.include_current,
        args.incremental,
        None,
        "sgrd",
    )
    stage_seconds["featurize"] = seconds
    outputs.append(str(manifest))

    t0 = time.perf_counter()
    hird_path = features_dir / f"netlist_hird_m{cfg.layers[0].index}.sgrd"
    report = _eval_pair(hird_path, args.out / "golden.sgrd", 0.0)
    eval_path = args.out / "eval.json"
    eval_path.write_text(report.to_json() + "\n", encoding="utf-8")
    outputs.append(str(eval_path))
    stage_seconds["eval"] = time.perf_counter() - t0

    run = RunManifest(
        command="pipeline",
        inputs={"config": str(args.config)},
        pixel_pitch=args.pitch,
        vdd=system.vdd,
        flags={
            "include_current": args.include_current,
            "incremental": args.incremental,
            "cache_hit": hit,
            "seed": cfg.seed,
        },
        out_dir=str(args.out),
        outputs=outputs,
        stage_seconds=stage_seconds,
    )
    run.write(args.out / "run_manifest.json")
    print(report.to_json())
    total = sum(stage_seconds.values())
    print(
        f"pipeline done in {total:.2f}s "
        f"({', '.join(f'{k} {v:.2f}s' for k, v in stage_seconds.items())})"
    )
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _apply_threads(args.threads)

    from .metrics import DimensionMismatchError
    from .netlist import NetlistError
    from .pdngen import GenConfigError, GenError
    from .solver import SolverError

    handlers = {
        "gen": cmd_gen,
        "solve": cmd_solve,
        "featurize": cmd_featurize,
        "eval": cmd_eval,
        "pipeline": cmd_pipeline,
    }
    try:
        return handlers[args.command](args)
    except (GenConfigError, GenError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except (NetlistError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
