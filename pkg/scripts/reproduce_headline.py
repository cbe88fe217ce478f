#!/usr/bin/env python3
"""Run both schemes on the default preset and write reports + comparison tables.

    python scripts/reproduce_headline.py --out results/headline
"""

import argparse
import dataclasses

from catsim.config import paper_preset
from catsim.experiment import simulate
from catsim.metrics import compare, write_comparison_files, write_report_files


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/headline")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    cfg = dataclasses.replace(paper_preset(), seed=args.seed, out=args.out)
    reports = {}
    for scheme in ("cats", "baseline"):
        reports[scheme], _ = simulate(cfg, scheme)
        write_report_files(reports[scheme], args.out)
    comp = compare(reports["cats"], reports["baseline"])
    print(comp.format())
    print("\neffective throughput (Mbit/s, bytes over completion - submission)")
    for scheme, rep in reports.items():
        row = " ".join(f"P{g.priority}={g.effective_throughput_bps / 1e6:.3f}"
                       for g in sorted(rep.groups, key=lambda g: g.priority))
        print(f"  {scheme:<9}{row}")
    for p in write_comparison_files(comp, reports["cats"], reports["baseline"], args.out):
        print(f"wrote {p}")


if __name__ == "__main__":
    main()
