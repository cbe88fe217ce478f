"""Command line: ``catsim run | compare | sweep``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .config import SCHEMES, TRACES, ExperimentConfig, load_config, paper_preset
from .engine import SimulationError
from .experiment import simulate
from .metrics import (ConfigMismatch, compare, load_report, write_comparison_files,
                      write_report_files)
from .net import ConfigError

log = logging.getLogger("catsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISMATCH = 3
EXIT_SIM = 4


def _trace_list(values: Optional[list[str]]) -> list[str]:
    out: list[str] = []
    for v in values or []:
        for name in v.split(","):
            name = name.strip()
            if name and name not in out:
                out.append(name)
    return out


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = paper_preset()
    if args.config:
        cfg = load_config(args.config, cfg)
    if getattr(args, "scheme", None):
        cfg.scheme = args.scheme
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out = args.out
    if args.trace:
        cfg.trace = _trace_list(args.trace)
    return cfg.validate()


def cmd_run(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    report, _ = simulate(cfg, trace_dir=cfg.out)
    paths = write_report_files(report, cfg.out)
    d = report.to_dict()
    print(f"{cfg.scheme}: total {d['total_load_ms']:.1f} ms, FCP {d['fcp_ms']:.1f} ms, "
          f"TTI {d['tti_ms']:.1f} ms, LCP {d['lcp_ms']:.1f} ms, CLS {d['cls_class']}")
    for p in paths:
        print(f"  wrote {p}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    a, b = load_report(args.run_a), load_report(args.run_b)
    by = {r.scheme: r for r in (a, b)}
    cats, baseline = (by["cats"], by["baseline"]) if len(by) == 2 else (a, b)
    try:
        comp = compare(cats, baseline)
    except ConfigMismatch as e:
        print(f"refusing to compare: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    print(comp.format())
    if args.out:
        for p in write_comparison_files(comp, cats, baseline, args.out):
            print(f"  wrote {p}")
    return EXIT_OK


def _sweep_one(cfg: ExperimentConfig) -> dict:
    row = {"seed": cfg.seed}
    reports = {}
    for scheme in SCHEMES:
        c = dataclasses.replace(cfg, scheme=scheme, trace=[])
        report, _ = simulate(c)
        write_report_files(report, Path(cfg.out) / f"seed{cfg.seed}")
        reports[scheme] = report
    comp = compare(reports["cats"], reports["baseline"])
    for r in comp.rows:
        row[f"{r['metric']}_baseline"] = r["baseline"]
        row[f"{r['metric']}_cats"] = r["cats"]
        if r["improvement"] is not None:
            row[f"{r['metric']}_improvement"] = round(r["improvement"], 6)
    row["total_baseline_ms"] = reports["baseline"].total_load_ms
    row["total_cats_ms"] = reports["cats"].total_load_ms
    row["load_parity"] = comp.load_parity
    return row


def cmd_sweep(args: argparse.Namespace) -> int:
    base = build_config(args)
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    cfgs = [dataclasses.replace(base, seed=s) for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, cfgs))
    else:
        rows = [_sweep_one(c) for c in cfgs]
    out = Path(base.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"seed {r['seed']}: FCP {100 * r['FCP_improvement']:.1f}%  "
              f"TTI {100 * r['TTI_improvement']:.1f}%  parity {100 * r['load_parity']:.2f}%")
    print(f"wrote {path}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--preset", choices=["paper"], default="paper",
                        help="base parameters (the only preset is the dumbbell webpage experiment)")
        sp.add_argument("--config", help="JSON config file overlaid on the preset")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--trace", action="append", metavar="KIND",
                        help=f"enable traces ({', '.join(TRACES)}); repeat or comma-separate")

    run = sub.add_parser("run", help="simulate one scheme")
    run.add_argument("--scheme", choices=SCHEMES)
    common(run)
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="compare two run reports")
    cmp_.add_argument("run_a")
    cmp_.add_argument("run_b")
    cmp_.add_argument("--out", help="directory for comparison tables and plot data")
    cmp_.set_defaults(func=cmd_compare)

    sw = sub.add_parser("sweep", help="run both schemes over several seeds")
    common(sw)
    sw.add_argument("--seeds", type=int, default=5)
    sw.add_argument("--first-seed", type=int, default=1)
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as e:
        print(f"simulation failed: {e}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
