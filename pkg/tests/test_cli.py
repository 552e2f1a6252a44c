import json

import numpy as np
import pytest

from irkit.cli import main
from irkit.grids import ScalarGrid, read_sgrd, write_sgrd
from irkit.metrics import EvalReport

CONFIG = """
chip_width = 40
chip_height = 40
layers = 1:h:8:0.04 ; 2:v:10:0.02
pad_rule = grid
pad_count = 4
sink_count = 12
seed = 7
"""

BAD_NETLIST = "R1 n1_m1_0_0 bogus 1.0\n"

NO_PAD_NETLIST = "R1 n1_m1_0_0 n1_m1_2000_0 1.0\nI1 n1_m1_2000_0 0 1e-3\n"


@pytest.fixture
def config_path(tmp_path):
    p = tmp_path / "grid.cfg"
    p.write_text(CONFIG)
    return p


def run(*argv):
    return main([str(a) for a in argv])


class TestGen:
    def test_writes_netlist_and_manifest(self, tmp_path, config_path, capsys):
        out = tmp_path / "out"
        assert run("gen", config_path, "--out", out) == 0
        assert (out / "pdn.sp").exists()
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["command"] == "gen"
        assert "gen" in manifest["stage_seconds"]
        assert "pdn.sp" in capsys.readouterr().out

    def test_bad_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("chip_width=10\nchip_height=10\nlayers=1:h:4:0.1;2:h:4:0.1\n")
        assert run("gen", bad, "--out", tmp_path) == 2
        assert "error" in capsys.readouterr().err

    def test_missing_config_exits_1(self, tmp_path):
        assert run("gen", tmp_path / "absent.cfg", "--out", tmp_path) == 1


class TestSolve:
    def test_emits_three_formats(self, tmp_path, config_path):
        out = tmp_path / "out"
        run("gen", config_path, "--out", out)
        assert run("solve", out / "pdn.sp", "--out", out, "--pitch", 2.0) == 0
        for suffix in (".sgrd", ".csv", ".pgm"):
            assert (out / f"golden{suffix}").exists()
        grid = read_sgrd(out / "golden.sgrd")
        assert grid.units == "volts"
        assert grid.values.max() > 0

    def test_parse_error_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.sp"
        bad.write_text(BAD_NETLIST)
        assert run("solve", bad, "--out", tmp_path) == 1
        assert "error" in capsys.readouterr().err

    def test_no_pads_exits_3(self, tmp_path):
        orphan = tmp_path / "nopads.sp"
        orphan.write_text(NO_PAD_NETLIST)
        assert run("solve", orphan, "--out", tmp_path) == 3


class TestFeaturize:
    def test_exports_stack_with_manifest(self, tmp_path, config_path):
        out = tmp_path / "out"
        run("gen", config_path, "--out", out)
        assert run("featurize", out / "pdn.sp", "--out", out / "feat") == 0
        manifest = out / "feat" / "pdn_manifest.csv"
        assert manifest.exists()
        names = [line.split(",")[0] for line in manifest.read_text().splitlines()]
        assert names[0] == "pdn_density"
        assert "hird_m1" in names

    def test_warm_cache_rewrites_nothing(self, tmp_path, config_path):
        out = tmp_path / "out"
        run("gen", config_path, "--out", out)
        feat = out / "feat"
        assert run("featurize", out / "pdn.sp", "--out", feat) == 0
        stamps = {p: p.stat().st_mtime_ns for p in feat.iterdir() if p.is_file()}
        assert run("featurize", out / "pdn.sp", "--out", feat) == 0
        for p, stamp in stamps.items():
            if p.name == "run_manifest.json":
                continue  # the run record itself is rewritten
            assert p.stat().st_mtime_ns == stamp, f"{p.name} was rewritten"
        manifest = json.loads((feat / "run_manifest.json").read_text())
        assert manifest["flags"]["cache_hit"] is True

    def test_cache_dir_override(self, tmp_path, config_path, monkeypatch):
        out = tmp_path / "out"
        cache = tmp_path / "shared_cache"
        monkeypatch.setenv("IRKIT_CACHE_DIR", str(cache))
        run("gen", config_path, "--out", out)
        assert run("featurize", out / "pdn.sp", "--out", out / "feat") == 0
        assert any(cache.iterdir())

    def test_include_current_adds_channel(self, tmp_path, config_path):
        out = tmp_path / "out"
        run("gen", config_path, "--out", out)
        run("featurize", out / "pdn.sp", "--out", out / "feat", "--include-current")
        names = [
            line.split(",")[0]
            for line in (out / "feat" / "pdn_manifest.csv").read_text().splitlines()
        ]
        assert "current" in names

    def test_size_flag_resizes_export(self, tmp_path, config_path):
        out = tmp_path / "out"
        run("gen", config_path, "--out", out)
        run("featurize", out / "pdn.sp", "--out", out / "feat", "--size", 16, 16)
        grid = read_sgrd(out / "feat" / "pdn_hird_m1.sgrd")
        assert grid.shape == (16, 16)


class TestEval:
    def test_single_pair_prints_report(self, tmp_path, capsys):
        a = ScalarGrid(np.array([[0.01, 0.02]], dtype=np.float32), units="volts")
        b = ScalarGrid(np.array([[0.01, 0.04]], dtype=np.float32), units="volts")
        write_sgrd(a, tmp_path / "pred.sgrd")
        write_sgrd(b, tmp_path / "gold.sgrd")
        assert run("eval", tmp_path / "pred.sgrd", tmp_path / "gold.sgrd") == 0
        report = EvalReport.from_json(capsys.readouterr().out.strip())
        assert report.e_max_mv == pytest.approx(20.0, rel=1e-4)

    def test_dimension_mismatch_exits_4(self, tmp_path):
        a = ScalarGrid(np.zeros((2, 2), dtype=np.float32))
        b = ScalarGrid(np.zeros((3, 3), dtype=np.float32))
        write_sgrd(a, tmp_path / "pred.sgrd")
        write_sgrd(b, tmp_path / "gold.sgrd")
        assert run("eval", tmp_path / "pred.sgrd", tmp_path / "gold.sgrd") == 4

    def test_batch_mode_prints_csv(self, tmp_path, capsys):
        pred_dir = tmp_path / "pred"
        gold_dir = tmp_path / "gold"
        pred_dir.mkdir()
        gold_dir.mkdir()
        for name in ("a.sgrd", "b.sgrd"):
            write_sgrd(
                ScalarGrid(np.full((2, 2), 0.01, dtype=np.float32)), pred_dir / name
            )
            write_sgrd(
                ScalarGrid(np.full((2, 2), 0.02, dtype=np.float32)), gold_dir / name
            )
        assert run("eval", pred_dir, gold_dir) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == EvalReport.CSV_HEADER
        assert len(lines) == 3
        assert lines[1].startswith("a.sgrd,a.sgrd,")


class TestPipeline:
    def test_full_run_and_warm_rerun(self, tmp_path, config_path, capsys):
        out = tmp_path / "run"
        assert run("pipeline", config_path, "--out", out, "--pitch", 2.0) == 0
        expected = [
            "netlist.sp",
            "golden.sgrd",
            "golden.csv",
            "golden.pgm",
            "eval.json",
            "run_manifest.json",
        ]
        for name in expected:
            assert (out / name).exists(), name
        report = EvalReport.from_json((out / "eval.json").read_text())
        assert report.e_avg_mv >= 0.0
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert set(manifest["stage_seconds"]) == {"gen", "solve", "featurize", "eval"}
        capsys.readouterr()

        feature_files = sorted((out / "features").glob("*.sgrd"))
        stamps = {p: p.stat().st_mtime_ns for p in feature_files}
        assert run("pipeline", config_path, "--out", out, "--pitch", 2.0) == 0
        for p, stamp in stamps.items():
            assert p.stat().st_mtime_ns == stamp, f"{p.name} was refeaturized"
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["flags"]["cache_hit"] is True
