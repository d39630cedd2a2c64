#!/usr/bin/env python3
"""Generate a small demo project with a planted lighting failure.

Usage: python scripts/make_demo_project.py [out_dir] [--seed N] [--frames N]
"""

import argparse
from dataclasses import replace

from vizex.synth import StepEvent, generate_scenario, lighting_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="demo_project")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--frames", type=int, default=600)
    args = ap.parse_args()

    spec = replace(
        lighting_scenario(args.seed, frame_count=args.frames),
        events=(StepEvent(frame=args.frames // 2, magnitude=-80.0),),
    )
    root, truth = generate_scenario(spec, args.out)
    print(f"project written to {root}")
    print(f"planted truth: {truth.to_json()}")
    print()
    print("try:")
    print(f'  vizex query "SELECT * FROM scene WHERE count_error = -1 BECAUSE luminosity" --project {root}')
    print(f"  vizex serve --project {root} --port 8650")


if __name__ == "__main__":
    main()
