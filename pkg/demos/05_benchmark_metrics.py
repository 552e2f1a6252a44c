"""Score a distilled IR-drop map against the golden map.

Reports mean/max error in millivolts and the hotspot F1, where hotspots
are pixels strictly above 90% of the golden maximum. The same numbers are
what the `eval` CLI subcommand prints as JSON.
"""

from irkit.hird import distill
from irkit.metrics import evaluate
from irkit.pdngen import generate, parse_gen_config
from irkit.solver import golden_ir_map, grid_spec_for, solve_graph

CONFIG = """\
chip_width = 80
chip_height = 80
layers = 1:h:4:0.05 ; 2:v:8:0.03
pad_count = 9
sink_count = 50
seed = 17
"""


def main():
    g = generate(parse_gen_config(CONFIG))
    spec = grid_spec_for(g, pixel_pitch=2.0)

    golden = golden_ir_map(solve_graph(g), g, spec)
    maps, _, _ = distill(g, spec)
    prediction = maps[0]  # bottom-layer cumulative drop

    report = evaluate(prediction, golden)
    print("distilled map vs golden:")
    print(f"  e_avg {report.e_avg_mv:.4f} mV   e_max {report.e_max_mv:.4f} mV")
    print(f"  F1 {report.f1:.3f} at tau = {report.tau_v * 1e3:.4f} mV "
          f"(tp={report.tp} fp={report.fp} fn={report.fn})")
    print("\nas the eval subcommand would print it:")
    print(report.to_json())


if __name__ == "__main__":
    main()
