#!/usr/bin/env python3
"""Planted-cause recovery and confound-rejection batteries.

Runs the light-switch scenario over many seeds, queries the true cause
(luminosity) and a known-null confound (edge_fraction), and reports hit and
false-alarm counts.

Usage: python scripts/lighting_battery.py [--seeds N] [--tolerance F]
"""

import argparse

from vizex.synth import lighting_scenario, run_query_battery

TRUE_QUERY = "SELECT * FROM scene WHERE count_error = -1 BECAUSE luminosity"
NULL_QUERY = "SELECT * FROM scene WHERE count_error = -1 BECAUSE edge_fraction"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--tolerance", type=int, default=20)
    args = ap.parse_args()

    print(f"recovery battery ({args.seeds} seeds): {TRUE_QUERY}")
    r = run_query_battery(lighting_scenario, TRUE_QUERY, args.seeds, args.tolerance)
    print(f"  top-window hits : {r.top_hits}/{r.n_seeds}")
    print(f"  any-window hits : {r.any_hits}/{r.n_seeds}")
    print(f"  elapsed         : {r.elapsed_seconds:.1f}s")
    print()
    print(f"confound battery ({args.seeds} seeds): {NULL_QUERY}")
    c = run_query_battery(lighting_scenario, NULL_QUERY, args.seeds, args.tolerance)
    print(f"  runs with windows: {c.seeds_with_windows}/{c.n_seeds}")
    print(f"  elapsed          : {c.elapsed_seconds:.1f}s")


if __name__ == "__main__":
    main()
