#!/usr/bin/env python3
"""Serial vs parallel comparison: clean source passes, biased source is caught.

Runs the same Poisson-clock system twice — one serial sweep, one per-clock
parallel run — first with the ideal source and then with power_bias(2), and
prints the evidence table for each comparison.  The biased run has exponential
gaps on both sides (they just run fast), so the giveaway is the serial mark
histogram, not the inter-event law.
"""

import argparse

from clockcheck.detector import serial_parallel_compare
from clockcheck.process import ParallelConfig, SerialConfig, simulate_parallel, simulate_serial
from clockcheck.rng import IDEAL, PowerBias


def run(label, fault, *, n_clocks, horizon, seed, alpha):
    serial = simulate_serial(SerialConfig(n_clocks, horizon, seed, fault))
    parallel = simulate_parallel(ParallelConfig(n_clocks, horizon, seed, fault, workers=4))
    verdict = serial_parallel_compare(serial, parallel, alpha=alpha)
    print(f"--- {label}: {verdict.outcome} "
          f"({len(serial)} serial / {len(parallel)} parallel events)")
    for e in verdict.evidence:
        p = "   (refused)" if e.p_value is None else f"p={e.p_value:.2e}"
        flag = "  <-- flagged" if e.p_value is not None and e.p_value < alpha else ""
        print(f"    {e.test:<22} stat={e.statistic:>9.4f}  {p}{flag}")
    print()
    return verdict


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-clocks", type=int, default=16)
    parser.add_argument("--horizon", type=float, default=400.0)
    parser.add_argument("--alpha", type=float, default=0.01)
    args = parser.parse_args()

    kw = dict(n_clocks=args.n_clocks, horizon=args.horizon,
              seed=args.seed, alpha=args.alpha)
    clean = run("ideal source", IDEAL, **kw)
    biased = run("power_bias(gamma=2)", PowerBias(2.0), **kw)
    if clean.diverged or not biased.diverged:
        raise SystemExit("demo did not separate the two sources; try another --seed")
    print("ideal consistent, biased diverged — detection works without ever "
          "seeing the raw uniforms")


if __name__ == "__main__":
    main()
