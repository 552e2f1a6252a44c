"""Benchmark metrics between a predicted and a golden IR-drop grid.

Errors are reported in millivolts. The hotspot set is every pixel whose
golden drop exceeds 90% of the testcase maximum (strictly greater: ties are
not hot); F1 compares the predicted hotspot set against it at the same
threshold. Two empty hotspot sets agree perfectly and score 1.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .grids import ScalarGrid

HOTSPOT_FRACTION = 0.9


class DimensionMismatchError(ValueError):
    pass


def _values_mv(grid) -> np.ndarray:
    """Millivolt view of the input.

    ScalarGrids convert by their units tag (solver and distillation maps are
    tagged "volts"); bare arrays are taken as millivolts already.
    """
    if isinstance(grid, ScalarGrid):
        scale = 1000.0 if grid.units in ("volts", "") else 1.0
        return grid.values.astype(np.float64) * scale
    return np.asarray(grid, dtype=np.float64)


def _aligned(pred, gold) -> tuple[np.ndarray, np.ndarray]:
    p, g = _values_mv(pred), _values_mv(gold)
    if p.shape != g.shape:
        raise DimensionMismatchError(
            f"prediction {p.shape} does not match golden {g.shape}"
        )
    return p, g


def mae(pred, gold) -> float:
    """Mean absolute error in millivolts."""
    p, g = _aligned(pred, gold)
    return float(np.mean(np.abs(p - g)))


def max_error(pred, gold) -> float:
    """Maximum absolute error in millivolts."""
    p, g = _aligned(pred, gold)
    return float(np.max(np.abs(p - g)))


def f1_hotspot(pred, gold) -> tuple[float, int, int, int, float]:
    """(f1, tp, fp, fn, threshold); threshold = 0.9 x max(gold), in volts."""
    p, g = _aligned(pred, gold)
    tau_mv = HOTSPOT_FRACTION * float(g.max())
    pred_hot = p > tau_mv
    gold_hot = g > tau_mv
    tp = int(np.count_nonzero(pred_hot & gold_hot))
    fp = int(np.count_nonzero(pred_hot & ~gold_hot))
    fn = int(np.count_nonzero(~pred_hot & gold_hot))
    tau = tau_mv / 1000.0
    if tp + fp + fn == 0:
        return 1.0, tp, fp, fn, tau
    return 2.0 * tp / (2.0 * tp + fp + fn), tp, fp, fn, tau


@dataclass(frozen=True)
class EvalReport:
    e_avg_mv: float
    e_max_mv: float
    f1: float
    tau_v: float
    tp: int
    fp: int
    fn: int
    runtime_s: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, line: str) -> "EvalReport":
        return cls(**json.loads(line))

    CSV_HEADER = "pred,gold,e_avg_mv,e_max_mv,f1,tau_v,tp,fp,fn,runtime_s"

    def csv_row(self, pred_name: str, gold_name: str) -> str:
        return (
            f"{pred_name},{gold_name},{self.e_avg_mv!r},{self.e_max_mv!r},"
            f"{self.f1!r},{self.tau_v!r},{self.tp},{self.fp},{self.fn},"
            f"{self.runtime_s!r}"
        )


def evaluate(pred, gold, runtime_seconds: float = 0.0) -> EvalReport:
    f1, tp, fp, fn, tau = f1_hotspot(pred, gold)
    return EvalReport(
        e_avg_mv=mae(pred, gold),
        e_max_mv=max_error(pred, gold),
        f1=f1,
        tau_v=tau,
        tp=tp,
        fp=fp,
        fn=fn,
        runtime_s=float(runtime_seconds),
    )
