import random

import pytest
from hypothesis import given, strategies as st

from catsim.bbr import (HIGH_GAIN, PACING_GAIN_CYCLE, BbrLite, DeliverySample, MaxFilter, Phase)
from catsim.config import paper_preset
from catsim.engine import NS_PER_S, ms
from catsim.experiment import attach_workload, build_stack, run_stack

MSS = 1448


def test_pacing_gap_unit_gain():
    cc = BbrLite()
    cc.pacing_rate = 2_000_000
    assert cc.pacing_gap(MSS) == 5_792_000


def test_pacing_gap_startup_gain():
    cc = BbrLite()
    cc.pacing_rate = HIGH_GAIN * 1_000_000
    # 1448*8/2.885e6 s = 4.01525 ms (rounded up to the ns)
    assert cc.pacing_gap(MSS) == 4_015_252


def test_pacing_gap_scales_with_segment():
    cc = BbrLite()
    cc.pacing_rate = 2_000_000
    assert cc.pacing_gap(724) == 2_896_000


def test_max_filter_window():
    f = MaxFilter(10)
    f.update(0, 5.0)
    f.update(3, 2.0)
    assert f.best == 5.0
    f.update(10, 1.0)
    assert f.best == 2.0
    f.update(13, 1.5)
    assert f.best == 1.5


@given(st.lists(st.floats(0, 1e9), min_size=1, max_size=60))
def test_max_filter_matches_bruteforce(values):
    f = MaxFilter(10)
    for rnd, v in enumerate(values):
        f.update(rnd, v)
        assert f.best == max(values[max(0, rnd - 9):rnd + 1])


def test_sample_interval_must_be_positive():
    with pytest.raises(ValueError):
        DeliverySample(1448, 0, ms(50))


def test_initial_state():
    cc = BbrLite()
    assert cc.phase is Phase.STARTUP
    assert cc.cwnd == 10 * MSS
    assert cc.send_budget(0, 0).allowed
    assert not cc.send_budget(10 * MSS, 0).allowed


class FakePath:
    """Feeds the controller the samples an ideal path of ``rate`` would produce."""

    def __init__(self, cc: BbrLite, rate=2_000_000, rtt=ms(50)):
        self.cc, self.rate, self.rtt = cc, rate, rtt
        self.now = 0
        self.delivered = 0

    def ack(self, nbytes=MSS, rtt=None, in_flight=None, gap=None):
        gap = gap or nbytes * 8 * NS_PER_S // self.rate
        prior = self.delivered
        self.now += gap
        self.delivered += nbytes
        return self.cc.on_delivery(DeliverySample(
            delivered_bytes=nbytes, interval=gap, rtt=rtt or self.rtt,
            prior_delivered=prior, delivered_total=self.delivered,
            in_flight=self.cc.cwnd if in_flight is None else in_flight,
            acked_bytes=nbytes, now=self.now))


def test_probe_rtt_after_rtprop_expiry():
    cc = BbrLite(rng=random.Random(1))
    path = FakePath(cc)
    for _ in range(50):
        path.ack()
    cc.filled_pipe = True
    cc._enter_probe_bw(path.now)
    stamp = cc.rt_prop_stamp
    while cc.phase is not Phase.PROBE_RTT and path.now < 20 * NS_PER_S:
        path.ack(rtt=ms(60), gap=ms(20))
    assert cc.phase is Phase.PROBE_RTT
    assert 10 * NS_PER_S < path.now - stamp <= 10 * NS_PER_S + ms(20)
    assert cc.cwnd <= 4 * MSS
    start = path.now
    while cc.phase is Phase.PROBE_RTT:
        path.ack(rtt=ms(60), in_flight=2 * MSS, gap=ms(10))
    assert path.now - start >= ms(200)
    assert cc.phase is Phase.PROBE_BW
    assert cc.rt_prop == ms(60)


def test_probe_bw_never_starts_in_drain_phase():
    for seed in range(40):
        cc = BbrLite(rng=random.Random(seed))
        cc._enter_probe_bw(0)
        assert cc.cycle_index != 1
        assert cc.pacing_gain == PACING_GAIN_CYCLE[cc.cycle_index]


def test_cwnd_floor():
    cc = BbrLite()
    path = FakePath(cc, rate=10_000)
    for _ in range(30):
        path.ack(nbytes=10)
    assert cc.cwnd >= 4 * MSS


@pytest.fixture(scope="module")
def baseline_stack():
    cfg = paper_preset()
    stack = build_stack(cfg, "baseline", {"cc": None})
    attach_workload(stack, cfg, cfg.workload_spec())
    run_stack(stack)
    return stack


def test_startup_converges_to_bottleneck(baseline_stack):
    hist = baseline_stack.cc.history
    # first ACK arrives at setup (50 ms) + one RTT; allow eight RTTs after it
    by = hist[0][0] + 8 * ms(50)
    bw = max(h[1] for h in hist if h[0] <= by)
    assert bw == pytest.approx(2_000_000, rel=0.10)


def test_phase_sequence(baseline_stack):
    phases = []
    for h in baseline_stack.cc.history:
        if not phases or phases[-1] != h[3]:
            phases.append(h[3])
    assert phases[:3] == ["Startup", "Drain", "ProbeBW"]


def test_rt_prop_close_to_path_rtt(baseline_stack):
    # first segment of the flight pays only serialization on top of 50 ms
    assert ms(50) < baseline_stack.cc.rt_prop < ms(60)
