import json

import pytest
from hypothesis import given, strategies as st

from catsim.metrics import (ConfigMismatch, GroupResult, RunReport, StreamTracker, cls_class,
                            cls_delta, compare, compare_completions, dumps_report,
                            effective_throughput, fcp, improvement, lcp, load_report, tti,
                            write_comparison_files, write_report_files)
from conftest import REFERENCE_BASELINE, REFERENCE_CATS


def test_reference_reconstruction():
    assert fcp(REFERENCE_CATS) == 282 and fcp(REFERENCE_BASELINE) == 1327
    assert tti(REFERENCE_CATS) == 523 and tti(REFERENCE_BASELINE) == 1327
    assert lcp(REFERENCE_CATS) == 815 and lcp(REFERENCE_BASELINE) == 1018
    assert max(REFERENCE_CATS.values()) == max(REFERENCE_BASELINE.values()) == 1327
    rows = {r["metric"]: r for r in compare_completions(REFERENCE_BASELINE, REFERENCE_CATS)}
    assert round(100 * rows["FCP"]["improvement"], 1) == 78.7
    assert round(100 * rows["TTI"]["improvement"], 1) == 60.6
    assert round(100 * rows["LCP"]["improvement"], 1) == 19.9
    assert rows["CLS"]["baseline"] == "good" and rows["CLS"]["cats"] == "poor"
    assert rows["CLS"]["improvement"] is None


def test_cls_examples():
    assert cls_delta(REFERENCE_BASELINE) == -275
    assert cls_delta(REFERENCE_CATS) == 533
    assert cls_class({1: 100, 3: 100}) == "good"
    assert cls_class({1: 100, 3: 500}) == "good"
    assert cls_class({1: 100, 3: 501}) == "poor"
    assert cls_class({1: 100, 3: 200}, poor_threshold_ms=50) == "poor"
    assert cls_class({1: 100}) is None


def test_missing_groups():
    assert fcp({0: 10}) is None
    assert lcp({0: 10}) is None
    assert fcp({0: 10, 1: 5}) == 10
    assert lcp({3: 42}) == 42


def test_improvement():
    assert improvement(100, 100) == 0
    assert improvement(0, 5) is None
    assert improvement(None, 5) is None


def test_effective_throughput():
    # 25 KB over 132 ms
    bps = effective_throughput(25 * 1024, 150_000_000, 282_000_000)
    assert bps == pytest.approx(1.5515e6, rel=1e-4)
    assert effective_throughput(100, 5, 5) is None
    assert effective_throughput(100, None, 5) is None


def test_tracker_completion_waits_for_all_bytes():
    t = StreamTracker()
    t.expect("a", 3000)
    t.record(0, [("a", 1000)])
    t.on_deliver(10, 1000)
    assert t.completion("a") is None
    t.record(1000, [("b", 500), ("a", 2000)])
    t.on_deliver(20, 1500)
    t.on_deliver(30, 3500)
    assert t.completion("a") == 30
    assert t.ranges == [(0, 1000, "a"), (1000, 1500, "b"), (1500, 3500, "a")]


def test_tracker_first_transmit():
    t = StreamTracker()
    t.record(0, [("a", 1000), ("b", 1000)])
    t.on_transmit(5, 0, 900, False)
    t.on_transmit(7, 900, 1448, False)
    assert t.first_transmit == {"a": 5, "b": 7}


def _report(scheme="cats", h="x", done=(100.0, 200.0, 300.0, 400.0, 500.0)):
    groups = [GroupResult(f"g{p}", p, 1000, 0.0, 1.0, c, 1.0, 1.0) for p, c in enumerate(done)]
    return RunReport(scheme, h, groups, 50.0)


def test_compare_refuses_mismatch():
    with pytest.raises(ConfigMismatch):
        compare(_report("cats", "a"), _report("baseline", "b"))


def test_compare_identical_is_zero():
    comp = compare(_report(), _report("baseline"))
    assert all(r["improvement"] in (0, None) for r in comp.rows)
    assert comp.load_parity == 0
    assert "Total page load" in comp.format()


def test_total_load_requires_every_group():
    r = _report(done=(1.0, None, 2.0, 3.0, 4.0))
    assert r.total_load_ms is None


def test_report_roundtrip_and_files(tmp_path):
    r = _report()
    text = dumps_report(r)
    assert json.loads(text)["fcp_ms"] == 200.0
    paths = write_report_files(r, tmp_path)
    assert all(p.exists() for p in paths)
    back = load_report(paths[0])
    assert dumps_report(back) == text
    assert (tmp_path / "cats_completion.dat").read_text().splitlines()[1] == "P0 100"
    files = write_comparison_files(compare(r, _report("baseline")), r, _report("baseline"), tmp_path)
    assert all(p.exists() for p in files)


@given(st.dictionaries(st.integers(0, 4), st.floats(0, 1e5), min_size=5, max_size=5))
def test_metric_orderings(c):
    assert fcp(c) <= tti(c) <= max(c.values())
