"""Point-to-point links with drop-tail queues, wired into a dumbbell."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .engine import NS_PER_S, Engine, ms
from .wire import HEADER_OVERHEAD


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LinkConfig:
    rate: int  # bits/s
    one_way_delay: int  # ns
    queue_capacity: int = 100  # packets waiting behind the one in service

    def __post_init__(self):
        if self.rate <= 0:
            raise ConfigError(f"link rate must be positive, got {self.rate}")
        if self.one_way_delay < 0:
            raise ConfigError(f"link delay must be non-negative, got {self.one_way_delay}")
        if self.queue_capacity < 1:
            raise ConfigError(f"queue_capacity must be >= 1, got {self.queue_capacity}")

    def serialization_ns(self, size: int) -> int:
        return -(-size * 8 * NS_PER_S // self.rate)


@dataclass
class Packet:
    data: bytes
    ingress_time: int = 0

    @property
    def size_on_wire(self) -> int:
        return len(self.data)


class Link:
    """One direction of a point-to-point link.

    A packet that finds the transmitter busy waits in a FIFO queue of
    ``queue_capacity`` slots; arrivals to a full queue are dropped.
    """

    def __init__(self, engine: Engine, config: LinkConfig, name: str = "link",
                 deliver: Optional[Callable[[Packet], None]] = None):
        self.engine = engine
        self.config = config
        self.name = name
        self.deliver = deliver
        self._queue: deque[Packet] = deque()
        self._busy = False
        self.submitted = 0
        self.delivered = 0
        self.dropped = 0
        self.in_transit = 0
        self.bytes_delivered = 0
        self.max_queue = 0
        self.departures: Optional[list[tuple[int, int]]] = None  # (ns, bytes) when recording

    def record_departures(self) -> None:
        self.departures = []

    @property
    def queue_length(self) -> int:
        return len(self._queue)

    def transmit(self, packet: Packet) -> bool:
        """Offer a packet; returns False if the drop-tail queue rejected it."""
        if packet.size_on_wire < HEADER_OVERHEAD:
            raise ValueError(f"packet of {packet.size_on_wire} bytes is below header size")
        self.submitted += 1
        packet.ingress_time = self.engine.now
        if self._busy:
            if len(self._queue) >= self.config.queue_capacity:
                self.dropped += 1
                return False
            self._queue.append(packet)
            self.max_queue = max(self.max_queue, len(self._queue))
        else:
            self._start(packet)
        return True

    def _start(self, packet: Packet) -> None:
        self._busy = True
        self.in_transit += 1
        tx = self.config.serialization_ns(packet.size_on_wire)
        self.engine.schedule_in(tx, lambda: self._finish(packet), self.name, "tx-done")

    def _finish(self, packet: Packet) -> None:
        if self.departures is not None:
            self.departures.append((self.engine.now, packet.size_on_wire))
        self.engine.schedule_in(self.config.one_way_delay, lambda: self._arrive(packet),
                                self.name, "arrive")
        if self._queue:
            self._start(self._queue.popleft())
        else:
            self._busy = False

    def _arrive(self, packet: Packet) -> None:
        self.in_transit -= 1
        self.delivered += 1
        self.bytes_delivered += packet.size_on_wire
        if self.deliver is not None:
            self.deliver(packet)


@dataclass(frozen=True)
class DumbbellConfig:
    bottleneck: LinkConfig
    access: LinkConfig
    rtt: Optional[int] = None  # ns; checked against the link delays when given

    def __post_init__(self):
        if self.rtt is not None and self.base_rtt != self.rtt:
            raise ConfigError(
                f"link delays give a {self.base_rtt} ns round trip, configured rtt is {self.rtt} ns")

    @property
    def base_rtt(self) -> int:
        return 2 * (self.bottleneck.one_way_delay + 2 * self.access.one_way_delay)

    @classmethod
    def from_rtt(cls, bottleneck_rate: int = 2_000_000, rtt: int = ms(50),
                 access_rate: int = 100_000_000, access_delay: int = ms(1),
                 queue_capacity: int = 100) -> "DumbbellConfig":
        """Give whatever delay the access links leave over to the bottleneck."""
        bottleneck_delay = rtt // 2 - 2 * access_delay
        if bottleneck_delay < 0 or rtt % 2:
            raise ConfigError(
                f"rtt {rtt} ns cannot fit two access links of {access_delay} ns each way")
        return cls(
            bottleneck=LinkConfig(bottleneck_rate, bottleneck_delay, queue_capacity),
            access=LinkConfig(access_rate, access_delay, queue_capacity),
            rtt=rtt,
        )


@dataclass
class Dumbbell:
    """sender -- access -- R1 == bottleneck == R2 -- access -- receiver"""

    engine: Engine
    config: DumbbellConfig
    forward: list[Link] = field(default_factory=list)
    reverse: list[Link] = field(default_factory=list)
    to_receiver: Optional[Callable[[Packet], None]] = None
    to_sender: Optional[Callable[[Packet], None]] = None

    @property
    def bottleneck_fwd(self) -> Link:
        return self.forward[1]

    @property
    def links(self) -> list[Link]:
        return self.forward + self.reverse

    def send_forward(self, packet: Packet) -> bool:
        return self.forward[0].transmit(packet)

    def send_reverse(self, packet: Packet) -> bool:
        return self.reverse[0].transmit(packet)


def build_dumbbell(engine: Engine, config: DumbbellConfig) -> Dumbbell:
    topo = Dumbbell(engine, config)

    def chain(names: list[str], cfgs: list[LinkConfig], sink_attr: str) -> list[Link]:
        links = [Link(engine, cfg, name) for name, cfg in zip(names, cfgs)]
        for a, b in zip(links, links[1:]):
            a.deliver = b.transmit
        links[-1].deliver = lambda pkt: getattr(topo, sink_attr)(pkt)
        return links

    cfgs = [config.access, config.bottleneck, config.access]
    topo.forward = chain(["access-s", "bottleneck-f", "access-r"], cfgs, "to_receiver")
    topo.reverse = chain(["access-r-rev", "bottleneck-r", "access-s-rev"], cfgs, "to_sender")
    return topo


def probe_rtt(config: DumbbellConfig, sizes: tuple[int, int] = (HEADER_OVERHEAD, 1500)) -> int:
    """Base RTT via a probe pair on an idle copy of the topology.

    Two echo probes of different sizes are timed; the RTT is affine in the
    probe size, so extrapolating to zero bytes removes serialization and
    leaves the propagation round trip.
    """
    rtts = []
    for size in sizes:
        engine = Engine()
        topo = build_dumbbell(engine, config)
        got: list[int] = []
        topo.to_receiver = lambda pkt: topo.send_reverse(Packet(pkt.data))
        topo.to_sender = lambda pkt: got.append(engine.now)
        topo.send_forward(Packet(bytes(size)))
        engine.run()
        rtts.append(got[0])
    (s1, s2), (r1, r2) = sizes, rtts
    return r1 - s1 * (r2 - r1) // (s2 - s1)
