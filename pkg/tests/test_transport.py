import random

import pytest
from hypothesis import given, settings, strategies as st

from catsim.bbr import BbrLite
from catsim.engine import Engine, ms
from catsim.net import Packet
from catsim.transport import FeedError, Receiver, SendBuffer, Sender
from catsim.wire import decode_segment


class Pipe:
    """Fixed-delay network with a programmable drop list (by data-segment index)."""

    def __init__(self, delay=ms(25), drop=(), mss=1448, buffer_capacity=64 * 1024):
        self.eng = Engine()
        self.drop = set(drop)
        self.n = 0
        self.log = []
        self.sender = Sender(self.eng, self._fwd, BbrLite(mss=mss), mss=mss,
                             buffer_capacity=buffer_capacity)
        self.receiver = Receiver(self.eng, self._rev)
        self.delay = delay

    def _fwd(self, pkt: Packet) -> bool:
        idx = self.n
        self.n += 1
        seg = decode_segment(pkt.data)
        self.log.append((self.eng.now, seg.seq, len(seg.payload), seg.header.priority))
        if idx in self.drop:
            return True
        self.eng.schedule_in(self.delay, lambda: self.receiver.receive(pkt))
        return True

    def _rev(self, pkt: Packet) -> bool:
        self.eng.schedule_in(self.delay, lambda: self.sender.receive(pkt))
        return True

    def stream(self, data: bytes, priority=None):
        off = 0

        def refill():
            nonlocal off
            while off < len(data):
                n = self.sender.write(data[off:off + 16384], priority)
                if n == 0:
                    return
                off += n

        self.sender.on_buffer_space(refill)
        self.sender.connect(0)
        refill()
        self.eng.run()


def test_send_buffer_runs():
    buf = SendBuffer(10_000)
    buf.append(b"a" * 100, 1)
    buf.append(b"b" * 100, 1)
    buf.append(b"c" * 50, 3)
    assert buf.priority_at(150) == 1 and buf.priority_at(200) == 3
    assert buf.run_end(0) == 200 and buf.run_end(220) == 250
    assert buf.release(120) == 120
    assert buf.slice(120, 130) == b"b" * 10
    assert buf.priority_at(120) == 1
    with pytest.raises(ValueError):
        SendBuffer(0)


def test_feed_contract():
    p = Pipe(buffer_capacity=2000)
    with pytest.raises(FeedError):
        p.sender.feed(b"", 0)
    with pytest.raises(FeedError):
        p.sender.feed(bytes(1449), 0)
    assert p.sender.feed(bytes(1448), 0, push=False) == 1448
    assert p.sender.feed(bytes(1000), 0, push=False) == 0  # all or nothing


def test_lossless_transfer():
    data = random.Random(1).randbytes(200_000)
    p = Pipe()
    p.stream(data, priority=2)
    assert bytes(p.receiver.stream) == data
    assert p.sender.retransmits == 0
    assert p.receiver.priority_counts[2] == p.sender.segments_sent
    assert p.sender.in_flight == 0 and p.sender.rto_timer is None


def test_single_drop_fast_retransmit():
    data = random.Random(2).randbytes(100_000)
    p = Pipe(drop={20})
    p.stream(data)
    assert bytes(p.receiver.stream) == data
    assert p.sender.fast_retransmits == 1 and p.sender.rto_fires == 0
    assert p.receiver.untagged_segments == p.sender.segments_sent - 1  # one was dropped


def test_burst_drop_partial_ack_recovery():
    data = random.Random(3).randbytes(100_000)
    p = Pipe(drop={20, 22, 24})
    p.stream(data)
    assert bytes(p.receiver.stream) == data
    assert p.sender.fast_retransmits == 1
    assert p.sender.retransmits == 3


def test_tail_drop_needs_rto_and_backoff():
    data = bytes(3000)
    p = Pipe(drop={2, 3, 4})  # last segment and its first two retransmissions
    p.stream(data)
    assert bytes(p.receiver.stream) == data
    assert p.sender.rto_fires == 3
    retx_times = [t for t, seq, n, _ in p.log if seq == 2896]
    gap1, gap2 = retx_times[2] - retx_times[1], retx_times[3] - retx_times[2]
    assert gap1 == ms(400)  # min RTO 200 ms, backed off once
    assert gap2 == 2 * gap1


def test_karn_no_sample_from_retransmission():
    p = Pipe(drop={0})
    p.stream(bytes(1000))
    # the only segment was retransmitted, so no RTT sample may have been taken
    assert not p.sender.rtt.initialized


def test_segments_never_straddle_priorities():
    p = Pipe()
    s = p.sender
    s.connect(0)
    p.eng.run()
    for prio, n in ((0, 700), (0, 700), (3, 1448), (1, 100)):
        s.feed(bytes(n), prio, push=False)
    s.try_send()
    p.eng.run()
    sizes = [(n, pr) for _, _, n, pr in p.log]
    assert sizes == [(1400, 0), (1448, 3), (100, 1)]


def test_ack_beyond_snd_nxt_is_protocol_error():
    p = Pipe()
    p.sender.connect(0)
    p.eng.run()
    info = p.sender.on_ack(10)
    assert p.sender.protocol_errors == 1 and info.cumulative_ack == 0


def test_send_ready_callback_fires_when_idle():
    p = Pipe()
    calls = []
    p.sender.on_send_ready(lambda: calls.append(p.eng.now))
    p.sender.connect(ms(50))
    p.eng.run()
    assert calls and calls[0] == ms(50)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), rate=st.floats(0.0, 0.15))
def test_reassembly_under_random_loss(seed, rate):
    rng = random.Random(seed)
    data = rng.randbytes(rng.randrange(1, 60_000))
    drops = {i for i in range(400) if rng.random() < rate}
    p = Pipe(drop=drops)
    p.stream(data)
    assert bytes(p.receiver.stream) == data
    assert p.sender.in_flight == 0
