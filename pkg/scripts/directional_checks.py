#!/usr/bin/env python3
"""Summarize the headline comparisons from a sweep results CSV.

Prints, with paired-seed sign tests:
  * effective slate size: gamma 0.8 vs the gamma 0 bandit, per algorithm;
  * play rate: off-policy vs on-policy control at gamma 0.8, per budget;
  * play-rate delta (gamma 0.8 - 0.2) at the smallest vs largest budget.

Usage:
    python scripts/directional_checks.py results.csv
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from slatesim.experiment import SweepResult, sign_test


def paired(result, metric, algorithm, gamma_hi, gamma_lo, loc):
    hi = result.metric_by_seed(metric, algorithm, gamma_hi, loc)
    lo = result.metric_by_seed(metric, algorithm, gamma_lo, loc)
    seeds = sorted(set(hi) & set(lo))
    return np.array([hi[s] for s in seeds]), np.array([lo[s] for s in seeds])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("results")
    args = parser.parse_args()
    result = SweepResult.from_csv(args.results)
    locs = sorted({r.budget_loc for r in result.rows})
    lo_loc, hi_loc = locs[0], locs[-1]

    print("== effective slate size: gamma 0.8 vs bandit (gamma 0), smallest budget ==")
    for alg in ("sarsa", "qlearning"):
        a, b = paired(result, "effective_slate_size", alg, 0.8, 0.0, lo_loc)
        try:
            p = sign_test(a, b)
        except ValueError:
            p = float("nan")
        print(f"  {alg:10s}: {b.mean():6.2f} -> {a.mean():6.2f}  (gain {a.mean() - b.mean():+.2f}, p={p:.2e})")

    print("== play rate at gamma 0.8: off-policy vs on-policy ==")
    for loc in (lo_loc, locs[len(locs) // 2], hi_loc):
        ql = result.metric_by_seed("play_rate", "qlearning", 0.8, loc)
        sa = result.metric_by_seed("play_rate", "sarsa", 0.8, loc)
        seeds = sorted(set(ql) & set(sa))
        mq = np.mean([ql[s] for s in seeds])
        ms = np.mean([sa[s] for s in seeds])
        print(f"  budget {loc:5g}: qlearning {mq:6.3f} vs sarsa {ms:6.3f}  ({'>=' if mq >= ms else '<'})")

    print("== play-rate delta (gamma 0.8 - 0.2): tight vs loose budget ==")
    for alg in ("sarsa", "qlearning", "montecarlo"):
        d = {}
        for loc in (lo_loc, hi_loc):
            a, b = paired(result, "play_rate", alg, 0.8, 0.2, loc)
            d[loc] = a.mean() - b.mean()
        trend = "shrinks" if d[lo_loc] >= d[hi_loc] else "GROWS"
        print(f"  {alg:10s}: {d[lo_loc]:+.3f} @ {lo_loc:g}  vs  {d[hi_loc]:+.3f} @ {hi_loc:g}  ({trend})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
