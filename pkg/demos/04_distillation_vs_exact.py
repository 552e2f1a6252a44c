"""How close does the stripe distillation get to the exact solve?

On a single-layer grid the per-stripe superposition IS the exact answer
(one linear system, solved in closed form). On stacked layers it ignores
lateral current sharing through lower layers, so it overestimates drops —
that residual error is exactly what a downstream regressor learns to
remove. This script quantifies both regimes.
"""

import numpy as np

from irkit.hird import bottom_up_pass, top_down_pass
from irkit.pdngen import GenConfig, LayerSpec, generate
from irkit.solver import solve_graph


def report(tag, g):
    exact = solve_graph(g)
    bu = bottom_up_pass(g)
    td = top_down_pass(g, bu)
    diffs = np.array([abs(td.voltages[n] - exact[n]) for n in sorted(g.nodes)])
    drops = np.array([exact.drop(n) for n in sorted(g.nodes)])
    print(f"{tag}: {len(g.nodes)} nodes")
    print(f"  exact worst drop      {drops.max() * 1e3:9.4f} mV")
    print(f"  |distilled - exact|   max {diffs.max() * 1e3:9.4f} mV, "
          f"mean {diffs.mean() * 1e3:.4f} mV")
    print(f"  pad current           {bu.total_pad_current * 1e3:.4f} mA "
          f"(sinks draw {g.total_sink_current * 1e3:.4f} mA)")


def main():
    single = generate(GenConfig(
        chip_width=60, chip_height=60,
        layers=(LayerSpec(1, "h", 5.0, 0.05),),
        pad_rule="stripe_ends", sink_count=25, seed=3, node_pitch=4.0,
    ))
    report("single layer (closed form is exact)", single)
    print()
    stacked = generate(GenConfig(
        chip_width=80, chip_height=80,
        layers=(
            LayerSpec(1, "h", 4.0, 0.05),
            LayerSpec(2, "v", 8.0, 0.03),
            LayerSpec(3, "h", 16.0, 0.02),
        ),
        pad_count=9, sink_count=40, seed=11,
    ))
    report("three layers (upper bound, current conserved)", stacked)


if __name__ == "__main__":
    main()
