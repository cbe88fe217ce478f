import pytest

from catsim.engine import Engine, ms
from catsim.net import (ConfigError, DumbbellConfig, Link, LinkConfig, Packet, build_dumbbell,
                        probe_rtt)


def _link(rate=2_000_000, delay=ms(10), cap=100):
    eng = Engine()
    got = []
    link = Link(eng, LinkConfig(rate, delay, cap), deliver=lambda p: got.append((eng.now, p)))
    return eng, link, got


def test_serialization_1500_at_2mbps():
    assert LinkConfig(2_000_000, 0).serialization_ns(1500) == ms(6)


def test_single_packet_arrival():
    eng, link, got = _link()
    link.transmit(Packet(bytes(1500)))
    eng.run()
    assert got[0][0] == ms(6) + ms(10)


def test_back_to_back_spacing():
    eng, link, got = _link()
    link.transmit(Packet(bytes(1500)))
    link.transmit(Packet(bytes(1500)))
    eng.run()
    assert got[1][0] - got[0][0] == ms(6)


def test_drop_tail():
    eng, link, got = _link(cap=2)
    results = [link.transmit(Packet(bytes(100))) for _ in range(5)]
    eng.run()
    assert results == [True, True, True, False, False]  # 1 in service + 2 queued
    assert link.dropped == 2 and link.delivered == 3 and link.max_queue == 2


def test_fifo_order_preserved():
    eng, link, got = _link()
    for i in range(10):
        link.transmit(Packet(bytes([i]) * 60))
    eng.run()
    assert [p.data[0] for _, p in got] == list(range(10))


def test_bad_configs():
    with pytest.raises(ConfigError):
        LinkConfig(0, 0)
    with pytest.raises(ConfigError):
        LinkConfig(1, -1)
    with pytest.raises(ConfigError):
        LinkConfig(1, 0, 0)
    with pytest.raises(ConfigError):
        DumbbellConfig.from_rtt(rtt=ms(2), access_delay=ms(1))
    with pytest.raises(ValueError):
        _link()[1].transmit(Packet(bytes(10)))


def test_dumbbell_delays():
    cfg = DumbbellConfig.from_rtt()
    assert cfg.bottleneck.one_way_delay == ms(23)
    assert cfg.access.one_way_delay == ms(1)
    assert cfg.base_rtt == ms(50)


def test_probe_min_rtt_is_50ms():
    assert probe_rtt(DumbbellConfig.from_rtt()) == ms(50)


def test_dumbbell_end_to_end_delay():
    eng = Engine()
    topo = build_dumbbell(eng, DumbbellConfig.from_rtt())
    got = []
    topo.to_receiver = lambda p: got.append(eng.now)
    topo.send_forward(Packet(bytes(1500)))
    eng.run()
    ser = 2 * LinkConfig(100_000_000, 0).serialization_ns(1500) + ms(6)
    assert got == [ms(25) + ser]


def test_bulk_transfer_floor():
    # 283 KB through the bottleneck can not finish faster than its serialization time
    eng = Engine()
    topo = build_dumbbell(eng, DumbbellConfig.from_rtt(queue_capacity=1000))
    done = []
    topo.to_receiver = lambda p: done.append(eng.now)
    total = 283 * 1024
    while total > 0:
        n = min(1448, total)
        topo.bottleneck_fwd.transmit(Packet(bytes(n + 40)))
        total -= n
    eng.run()
    assert topo.bottleneck_fwd.dropped == 0
    assert done[-1] >= 283 * 1024 * 8 * 10**9 // 2_000_000
