#!/usr/bin/env python3
"""Greedy vs stochastic-greedy logdet selection over a grid of (n, k).

Keeps k/n fixed at 1/2 and prints median wall time, speedup and gain ratio.
"""
import argparse
import statistics

from goodfeat.cli import run_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--trials", type=int, default=10)
    args = ap.parse_args()

    print(f"{'n':>5} {'k':>5} {'greedy ms':>10} {'stoch ms':>9} {'speedup':>8} {'gain ratio':>10}")
    for n in args.sizes:
        k = n // 2
        records, summary = run_bench(n, k, args.epsilon, args.trials)
        med = {m: statistics.median(r["time_us"] for r in records if r["method"] == m) / 1e3
               for m in ("greedy", "stochastic")}
        print(f"{n:>5} {k:>5} {med['greedy']:>10.2f} {med['stochastic']:>9.2f} "
              f"{summary['median_speedup']:>8.1f} {summary['median_gain_ratio']:>10.4f}")


if __name__ == "__main__":
    main()
