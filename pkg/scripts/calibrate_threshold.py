#!/usr/bin/env python3
"""Inspect the simulated-null significance calibration.

Prints the calibrated |t| threshold for a few (length, bandwidth, alpha)
combinations and the realized family-wise false-alarm rate on fresh noise.

Usage: python scripts/calibrate_threshold.py [--fresh N]
"""

import argparse

import numpy as np

from vizex.rdd import null_threshold, scan_statistics


def realized_rate(n, bandwidth, threshold, fresh, entropy=123):
    alarms = 0
    for i in range(fresh):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=entropy, spawn_key=(i,)))
        )
        _, _, t = scan_statistics(rng.standard_normal(n), bandwidth)
        if np.max(np.abs(t)) >= threshold:
            alarms += 1
    return alarms / fresh


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--fresh", type=int, default=500)
    args = ap.parse_args()

    print(f"{'n':>6} {'bw':>4} {'alpha':>6} {'threshold':>10} {'realized':>9}")
    for n in (500, 2000):
        for bw in (5, 10, 20, 40):
            if n < 2 * bw:
                continue
            for alpha in (0.05, 0.01):
                thr = null_threshold(n, bw, alpha=alpha, n_sims=500, seed=7)
                rate = realized_rate(n, bw, thr, args.fresh)
                print(f"{n:>6} {bw:>4} {alpha:>6} {thr:>10.3f} {rate:>9.3f}")


if __name__ == "__main__":
    main()
