"""Completion tracking, web QoE estimates, and report files."""

from __future__ import annotations

import bisect
import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .engine import NS_PER_S, to_ms

DEFAULT_CLS_POOR_MS = 400.0

FCP_PRIORITIES = (0, 1)
TTI_PRIORITIES = (0, 1, 2)
LCP_PRIORITY = 3
CLS_LAYOUT_PRIORITY = 1
CLS_IMAGE_PRIORITY = 3


class ConfigMismatch(ValueError):
    pass


class StreamTracker:
    """Maps stream byte ranges to application groups and timestamps them."""

    def __init__(self):
        self._starts: list[int] = []
        self._ranges: list[tuple[int, int, str]] = []
        self.group_end: dict[str, int] = {}
        self.expected: dict[str, int] = {}
        self.recorded: dict[str, int] = {}
        self.first_transmit: dict[str, int] = {}
        self.frontier: list[tuple[int, int]] = []  # (ns, in-order bytes at receiver)

    def expect(self, tag: str, nbytes: int) -> None:
        """Declare application bytes for ``tag``; completion waits for all of them."""
        self.expected[tag] = self.expected.get(tag, 0) + nbytes

    def record(self, offset: int, pieces: Iterable[tuple[Optional[str], int]]) -> None:
        for tag, n in pieces:
            if tag is not None:
                self.recorded[tag] = self.recorded.get(tag, 0) + n
                if self._ranges and self._ranges[-1][2] == tag and self._ranges[-1][1] == offset:
                    start = self._ranges[-1][0]
                    self._ranges[-1] = (start, offset + n, tag)
                else:
                    self._starts.append(offset)
                    self._ranges.append((offset, offset + n, tag))
                self.group_end[tag] = max(self.group_end.get(tag, 0), offset + n)
            offset += n

    @property
    def ranges(self) -> list[tuple[int, int, str]]:
        return list(self._ranges)

    def on_transmit(self, now: int, seq: int, end: int, retransmit: bool) -> None:
        i = max(0, bisect.bisect_right(self._starts, seq) - 1)
        while i < len(self._ranges) and self._ranges[i][0] < end:
            start, stop, tag = self._ranges[i]
            if stop > seq and tag not in self.first_transmit:
                self.first_transmit[tag] = now
            i += 1

    def on_deliver(self, now: int, rcv_nxt: int) -> None:
        self.frontier.append((now, rcv_nxt))

    def completion(self, tag: str) -> Optional[int]:
        end = self.group_end.get(tag)
        if end is None or self.recorded[tag] < self.expected.get(tag, 0):
            return None
        for now, upto in self.frontier:
            if upto >= end:
                return now
        return None


def effective_throughput(nbytes: int, start_ns: Optional[int],
                         end_ns: Optional[int]) -> Optional[float]:
    """bits/s over [start, end]; None when the interval is missing or empty."""
    if start_ns is None or end_ns is None or end_ns <= start_ns:
        return None
    return nbytes * 8 * NS_PER_S / (end_ns - start_ns)


@dataclass
class GroupResult:
    label: str
    priority: int
    bytes: int
    submit_ms: float
    first_transmit_ms: Optional[float]
    completion_ms: Optional[float]
    effective_throughput_bps: Optional[float]
    transfer_throughput_bps: Optional[float]


@dataclass
class RunReport:
    scheme: str
    config_hash: str
    groups: list[GroupResult]
    setup_ms: float
    transport: dict = field(default_factory=dict)
    network: dict = field(default_factory=dict)
    conductor: dict = field(default_factory=dict)
    cc: dict = field(default_factory=dict)
    assumptions: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    cls_poor_threshold_ms: float = DEFAULT_CLS_POOR_MS

    def completions(self) -> dict[int, float]:
        """Latest completion per priority level (ms)."""
        out: dict[int, float] = {}
        for g in self.groups:
            if g.completion_ms is None:
                continue
            out[g.priority] = max(out.get(g.priority, g.completion_ms), g.completion_ms)
        return out

    @property
    def total_load_ms(self) -> Optional[float]:
        done = [g.completion_ms for g in self.groups]
        if not done or any(c is None for c in done):
            return None
        return max(done)

    def to_dict(self) -> dict:
        c = self.completions()
        d = {
            "scheme": self.scheme,
            "config_hash": self.config_hash,
            "groups": [asdict(g) for g in self.groups],
            "total_load_ms": self.total_load_ms,
            "setup_ms": self.setup_ms,
            "fcp_ms": fcp(c),
            "tti_ms": tti(c),
            "lcp_ms": lcp(c),
            "cls_delta_ms": cls_delta(c),
            "cls_class": cls_class(c, self.cls_poor_threshold_ms),
            "cls_poor_threshold_ms": self.cls_poor_threshold_ms,
            "transport": self.transport,
            "network": self.network,
            "conductor": self.conductor,
            "cc": self.cc,
            "assumptions": self.assumptions,
            "config": self.config,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(
            scheme=d["scheme"], config_hash=d["config_hash"],
            groups=[GroupResult(**g) for g in d["groups"]],
            setup_ms=d["setup_ms"], transport=d.get("transport", {}),
            network=d.get("network", {}), conductor=d.get("conductor", {}),
            cc=d.get("cc", {}), assumptions=d.get("assumptions", {}),
            config=d.get("config", {}),
            cls_poor_threshold_ms=d.get("cls_poor_threshold_ms", DEFAULT_CLS_POOR_MS),
        )


# -- QoE estimates over {priority: completion_ms} ---------------------------

def _latest(completions: dict[int, float], levels: Iterable[int]) -> Optional[float]:
    try:
        return max(completions[p] for p in levels)
    except KeyError:
        return None


def fcp(completions: dict[int, float]) -> Optional[float]:
    """Last critical-rendering-path resource done (P0 and P1)."""
    return _latest(completions, FCP_PRIORITIES)


def tti(completions: dict[int, float]) -> Optional[float]:
    return _latest(completions, TTI_PRIORITIES)


def lcp(completions: dict[int, float]) -> Optional[float]:
    return completions.get(LCP_PRIORITY)


def cls_delta(completions: dict[int, float]) -> Optional[float]:
    if CLS_LAYOUT_PRIORITY not in completions or CLS_IMAGE_PRIORITY not in completions:
        return None
    return completions[CLS_IMAGE_PRIORITY] - completions[CLS_LAYOUT_PRIORITY]


def cls_class(completions: dict[int, float],
              poor_threshold_ms: float = DEFAULT_CLS_POOR_MS) -> Optional[str]:
    """'good' when images land before layout settles or soon after it, else 'poor'."""
    delta = cls_delta(completions)
    if delta is None:
        return None
    return "poor" if delta > poor_threshold_ms else "good"


def improvement(baseline: Optional[float], cats: Optional[float]) -> Optional[float]:
    """Fractional reduction of ``cats`` relative to ``baseline``."""
    if baseline is None or cats is None or baseline == 0:
        return None
    return (baseline - cats) / baseline


@dataclass
class Comparison:
    rows: list[dict]  # metric, baseline, cats, improvement
    groups: list[dict]
    load_parity: Optional[float]

    def metric(self, name: str) -> dict:
        return next(r for r in self.rows if r["metric"] == name)

    def format(self) -> str:
        lines = ["Priority group completion times (ms)",
                 f"{'group':<28}{'prio':>5}{'baseline':>11}{'cats':>11}"]
        for g in self.groups:
            lines.append(f"{g['label']:<28}{g['priority']:>5}"
                         f"{_fmt(g['baseline_ms'])}{_fmt(g['cats_ms'])}")
        lines += ["", "Estimated web performance",
                  f"{'metric':<10}{'baseline':>11}{'cats':>11}{'improv.':>10}"]
        for r in self.rows:
            imp = r["improvement"]
            imp_s = "N/A" if imp is None else f"{100 * imp:.1f}%"
            if r["metric"] == "CLS":
                lines.append(f"{'CLS':<10}{r['baseline']:>11}{r['cats']:>11}{'N/A':>10}")
            else:
                lines.append(f"{r['metric']:<10}{_fmt(r['baseline'])}{_fmt(r['cats'])}{imp_s:>10}")
        if self.load_parity is not None:
            lines.append(f"\ntotal-load parity |cats-baseline|/baseline = {100 * self.load_parity:.2f}%")
        return "\n".join(lines)


def _fmt(x: Optional[float]) -> str:
    return f"{'n/a':>11}" if x is None else f"{x:>11.1f}"


def compare_completions(baseline: dict[int, float], cats: dict[int, float],
                        cls_threshold_ms: float = DEFAULT_CLS_POOR_MS) -> list[dict]:
    rows = []
    for name, fn in (("FCP", fcp), ("TTI", tti), ("LCP", lcp)):
        b, c = fn(baseline), fn(cats)
        rows.append({"metric": name, "baseline": b, "cats": c, "improvement": improvement(b, c)})
    rows.append({"metric": "CLS", "baseline": cls_class(baseline, cls_threshold_ms),
                 "cats": cls_class(cats, cls_threshold_ms), "improvement": None})
    return rows


def compare(cats: RunReport, baseline: RunReport) -> Comparison:
    if cats.config_hash != baseline.config_hash:
        raise ConfigMismatch(
            f"reports come from different scenarios "
            f"({cats.config_hash[:12]} vs {baseline.config_hash[:12]})")
    cb, cc = baseline.completions(), cats.completions()
    rows = compare_completions(cb, cc, baseline.cls_poor_threshold_ms)
    b_by = {g.label: g for g in baseline.groups}
    groups = [{"label": g.label, "priority": g.priority,
               "baseline_ms": b_by[g.label].completion_ms if g.label in b_by else None,
               "cats_ms": g.completion_ms} for g in cats.groups]
    bt, ct = baseline.total_load_ms, cats.total_load_ms
    groups.append({"label": "Total page load", "priority": "-", "baseline_ms": bt, "cats_ms": ct})
    parity = None if not bt or ct is None else abs(ct - bt) / bt
    return Comparison(rows, groups, parity)


# -- files -------------------------------------------------------------------

def dumps_report(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def load_report(path: Union[str, Path]) -> RunReport:
    with open(path) as f:
        return RunReport.from_dict(json.load(f))


def write_report_files(report: RunReport, out: Union[str, Path]) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stem = report.scheme
    paths = [out / f"{stem}.json", out / f"{stem}_groups.csv",
             out / f"{stem}_completion.dat", out / f"{stem}_throughput.dat"]
    paths[0].write_text(dumps_report(report))
    with open(paths[1], "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["label", "priority", "bytes", "submit_ms", "first_transmit_ms",
                    "completion_ms", "effective_throughput_bps", "transfer_throughput_bps"])
        for g in report.groups:
            w.writerow([g.label, g.priority, g.bytes, g.submit_ms, g.first_transmit_ms,
                        g.completion_ms, g.effective_throughput_bps, g.transfer_throughput_bps])
    with open(paths[2], "w") as f:
        f.write("# priority completion_ms\n")
        for g in sorted(report.groups, key=lambda g: g.priority):
            f.write(f"P{g.priority} {_dat(g.completion_ms)}\n")
    with open(paths[3], "w") as f:
        f.write("# priority effective_throughput_mbps\n")
        for g in sorted(report.groups, key=lambda g: g.priority):
            mbps = None if g.effective_throughput_bps is None else g.effective_throughput_bps / 1e6
            f.write(f"P{g.priority} {_dat(mbps)}\n")
    return paths


def write_comparison_files(comp: Comparison, cats: RunReport, baseline: RunReport,
                           out: Union[str, Path]) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "comparison.txt"
    table.write_text(comp.format() + "\n")
    completion = out / "completion_compare.dat"
    throughput = out / "throughput_compare.dat"
    b_by = {g.label: g for g in baseline.groups}
    with open(completion, "w") as fc, open(throughput, "w") as ft:
        fc.write("# priority baseline_ms cats_ms\n")
        ft.write("# priority baseline_mbps cats_mbps\n")
        for g in sorted(cats.groups, key=lambda g: g.priority):
            b = b_by.get(g.label)
            fc.write(f"P{g.priority} {_dat(b and b.completion_ms)} {_dat(g.completion_ms)}\n")
            bt = b and b.effective_throughput_bps and b.effective_throughput_bps / 1e6
            ct = g.effective_throughput_bps and g.effective_throughput_bps / 1e6
            ft.write(f"P{g.priority} {_dat(bt)} {_dat(ct)}\n")
    summary = out / "comparison.json"
    summary.write_text(json.dumps({"metrics": comp.rows, "groups": comp.groups,
                                   "load_parity": comp.load_parity},
                                  indent=2, sort_keys=True) + "\n")
    return [table, completion, throughput, summary]


def _dat(x) -> str:
    return "?" if x is None else f"{x:.6g}"


def ns_to_ms(ns: Optional[int]) -> Optional[float]:
    return None if ns is None else to_ms(ns)
