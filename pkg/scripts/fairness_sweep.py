#!/usr/bin/env python3
"""Headline completions as the watermarks of queues 1-4 are scaled together; writes a CSV.

With the default watermarks no queue above P4 ever reaches its high mark on
this page, so only scaling them down lets lower priorities interleave.
"""

import argparse
import csv
import dataclasses
from pathlib import Path

from catsim.config import paper_preset
from catsim.experiment import simulate
from catsim.metrics import fcp, improvement


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/fairness_sweep.csv")
    ap.add_argument("--scales", type=float, nargs="*", default=[1, 0.5, 0.25, 0.125, 0.0625])
    args = ap.parse_args()

    base = paper_preset()
    baseline, _ = simulate(base, "baseline")
    b_fcp = fcp(baseline.completions())
    rows = []
    for scale in args.scales:
        high = [None] + [int(h * scale) for h in base.fairness.high[1:]]
        cfg = dataclasses.replace(base, fairness=dataclasses.replace(base.fairness, high=high))
        cats, _ = simulate(cfg, "cats")
        done = cats.completions()
        rows.append({"scale": scale, **{f"p{p}_ms": round(done[p], 3) for p in range(5)},
                     "total_ms": round(cats.total_load_ms, 3),
                     "fcp_improvement": round(improvement(b_fcp, fcp(done)), 4),
                     "deadlocks": cats.conductor["deadlock_resolutions"]})
        print(rows[-1])
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
