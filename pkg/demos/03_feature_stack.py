"""Build the full model-input feature stack for a generated grid.

Shows the canonical channel order (density, pad distance, per-layer wire
resistance, via conductance, resistive distances, distilled drop maps),
their physical units, and the z-score statistics recorded in the manifest.
"""

from pathlib import Path

from irkit.featurize import assemble_features, load_feature_stack
from irkit.hird import distill
from irkit.pdngen import generate, parse_gen_config
from irkit.solver import grid_spec_for

CONFIG = """\
chip_width = 60
chip_height = 60
layers = 1:h:4:0.05 ; 2:v:6:0.03
pad_count = 4
sink_count = 30
seed = 5
"""


def main():
    out = Path("demo_out")
    out.mkdir(exist_ok=True)

    g = generate(parse_gen_config(CONFIG))
    spec = grid_spec_for(g, pixel_pitch=2.0)

    maps, _, diags = distill(g, spec)
    for line in diags:
        print("distill:", line)

    stack = assemble_features(g, spec, maps, include_current=True)
    print(f"{len(stack)} channels at {spec.width}x{spec.height}:\n")
    print(f"{'channel':<14}{'units':<18}{'mean':>12}{'std':>12}")
    for name, (mean, std) in zip(stack.names, stack.stats):
        grid = stack.grid(name)
        print(f"{name:<14}{grid.units:<18}{mean:>12.4g}{std:>12.4g}")

    manifest = stack.export(out, stem="demo", fmt="sgrd")
    print(f"\nexported to {manifest.parent}/ (manifest: {manifest.name})")

    again = load_feature_stack(manifest)
    z = again.zscored()
    print(f"reloaded {len(again)} channels; z-scored tensor shape {z.shape}")


if __name__ == "__main__":
    main()
