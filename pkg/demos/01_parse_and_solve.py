"""Parse a hand-written netlist, sanity-check it, and solve it exactly.

The grid is the classic teaching case: one metal stripe with pads at both
ends and a sink in the middle. Symmetry says each pad supplies half the
current and the center node sags by I/2 * R_cumulative.
"""

from irkit.netlist import parse_netlist, validate
from irkit.solver import build_system, solve_exact

NETLIST = """\
* one stripe, two pads, one 1 mA sink in the middle
V1 n1_m1_0_0 0 1.1
V2 n1_m1_8000_0 0 1.1
R1 n1_m1_0_0 n1_m1_2000_0 1.0
R2 n1_m1_2000_0 n1_m1_4000_0 1.0
R3 n1_m1_4000_0 n1_m1_6000_0 1.0
R4 n1_m1_6000_0 n1_m1_8000_0 1.0
I1 n1_m1_4000_0 0 0.001
.end
"""


def main():
    g = parse_netlist(NETLIST)
    print(f"parsed {len(g.nodes)} nodes, {len(g.edges)} resistors, "
          f"{len(g.sinks)} sinks, {len(g.pads)} pads")

    findings = validate(g)
    print("validation findings:", findings or "none")

    system = build_system(g)
    voltages = solve_exact(system)
    print(f"solved {system.dimension} unknowns, residual {voltages.residual:.2e}\n")

    print(f"{'node':<18}{'volts':>10}{'drop (mV)':>12}")
    for node in sorted(g.nodes):
        print(f"{node.name:<18}{voltages[node]:>10.6f}{voltages.drop(node) * 1e3:>12.3f}")

    center = max(g.nodes, key=lambda n: voltages.drop(n))
    print(f"\nworst node: {center.name} at {voltages.drop(center) * 1e3:.3f} mV "
          f"(expect 1.0 mV: 0.5 mA through 2 ohms)")


if __name__ == "__main__":
    main()
