import numpy as np
import pytest

from irkit.grids import ScalarGrid
from irkit.metrics import (
    DimensionMismatchError,
    EvalReport,
    evaluate,
    f1_hotspot,
    mae,
    max_error,
)


def grid(values, units="volts"):
    return ScalarGrid(np.asarray(values, dtype=np.float32), units=units)


def test_mae_fixture_exact():
    assert mae([1.0, 2.0, 3.0], [1.0, 3.0, 5.0]) == 1.0


def test_mae_identity_and_shift():
    x = np.array([0.4, 0.7, 0.9])
    assert mae(x, x) == 0.0
    assert mae(x + 0.25, x) == pytest.approx(0.25)


def test_max_error():
    assert max_error([1.0, 2.0, 3.0], [1.0, 3.0, 5.0]) == 2.0


def test_volt_grids_convert_to_millivolts():
    pred = grid([[0.001, 0.002]])
    gold = grid([[0.003, 0.002]])
    assert mae(pred, gold) == pytest.approx(1.0, rel=1e-5)
    assert max_error(pred, gold) == pytest.approx(2.0, rel=1e-5)


def test_f1_arithmetic_fixture():
    # TP=8, FP=2, FN=2 -> 2*8/(2*8+2+2) = 0.8
    gold = np.zeros(20)
    gold[:10] = 10.0  # tau = 9, pixels 0..9 hot
    pred = np.zeros(20)
    pred[:8] = 10.0   # 8 true positives
    pred[10:12] = 10.0  # 2 false positives
    f1, tp, fp, fn, tau = f1_hotspot(pred, gold)
    assert (tp, fp, fn) == (8, 2, 2)
    assert f1 == pytest.approx(0.8)
    assert tau == pytest.approx(0.009)  # 9 mV in volts


def test_f1_identity_is_one():
    x = np.array([1.0, 5.0, 10.0, 2.0])
    f1, *_ = f1_hotspot(x, x)
    assert f1 == 1.0


def test_threshold_is_strict():
    # every pixel equals the max: nothing exceeds 0.9*max... except all do.
    # At exactly tau the pixel is NOT hot.
    gold = np.array([0.9, 1.0])
    pred = np.array([0.9, 1.0])
    f1, tp, fp, fn, _ = f1_hotspot(pred, gold)
    assert (tp, fp, fn) == (1, 0, 0)  # 0.9 == tau stays cold


def test_all_cold_prediction_scores_zero():
    gold = np.full(4, 1.0)
    pred = np.zeros(4)
    f1, tp, fp, fn, _ = f1_hotspot(pred, gold)
    assert f1 == 0.0 and tp == 0 and fn == 4


def test_both_empty_hotspot_sets_agree():
    # gold max = 0 -> tau = 0 -> strictly-greater leaves everything cold
    f1, tp, fp, fn, _ = f1_hotspot(np.zeros(5), np.zeros(5))
    assert f1 == 1.0 and (tp, fp, fn) == (0, 0, 0)


def test_dimension_mismatch_raises():
    with pytest.raises(DimensionMismatchError):
        mae(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(DimensionMismatchError):
        evaluate(grid([[1.0]]), grid([[1.0, 2.0]]))


def test_evaluate_bundles_everything():
    pred = grid([[0.00, 0.01], [0.02, 0.03]])
    gold = grid([[0.00, 0.01], [0.03, 0.03]])
    report = evaluate(pred, gold, runtime_seconds=1.5)
    assert report.e_avg_mv == pytest.approx(2.5, rel=1e-4)
    assert report.e_max_mv == pytest.approx(10.0, rel=1e-4)
    assert report.runtime_s == 1.5
    assert 0.0 <= report.f1 <= 1.0


def test_report_json_round_trip():
    report = EvalReport(1.0, 2.0, 0.5, 0.009, 3, 1, 2, 0.25)
    again = EvalReport.from_json(report.to_json())
    assert again == report


def test_report_csv_row_matches_header():
    report = EvalReport(1.0, 2.0, 0.5, 0.009, 3, 1, 2, 0.25)
    row = report.csv_row("a.sgrd", "b.sgrd")
    assert len(row.split(",")) == len(EvalReport.CSV_HEADER.split(","))
    assert row.startswith("a.sgrd,b.sgrd,")
