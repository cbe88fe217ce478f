"""Reliable byte-stream endpoints over the simulated network.

The sender owns a small send buffer that a feeder fills, segments it at
MSS, paces transmissions through the congestion controller, and recovers
from loss with fast retransmit (three duplicate ACKs) and an RTO timer.
The receiver reassembles in order and ACKs every segment.
"""

from __future__ import annotations

import bisect
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Optional, TextIO

from .bbr import BbrLite, DeliverySample
from .engine import Engine, Event
from .net import Packet
from .rto import RttEstimator, rto_update
from .wire import (FLAG_ACK, Segment, SegmentHeader, decode_segment, encode_segment,
                   hexdump)

DEFAULT_MSS = 1448
DEFAULT_SEND_BUFFER = 64 * 1024
DUPACK_THRESHOLD = 3


class FeedError(ValueError):
    """The caller broke the feeder contract (empty or oversized piece)."""


@dataclass(frozen=True)
class AckInfo:
    cumulative_ack: int
    rtt_sample: Optional[int]
    newly_acked: int
    is_duplicate: bool


@dataclass
class TxRecord:
    seq: int
    end: int
    priority: Optional[int]
    sent_time: int
    delivered: int
    delivered_time: int
    first_sent_time: int
    app_limited: bool
    retransmitted: bool = False

    @property
    def length(self) -> int:
        return self.end - self.seq


class SendBuffer:
    """Bytes from the oldest unacked offset to the end of the fed stream.

    ``runs`` marks which stream ranges carry which priority so segments
    never straddle a priority change.
    """

    def __init__(self, capacity: int = DEFAULT_SEND_BUFFER):
        if capacity <= 0:
            raise ValueError("send buffer capacity must be positive")
        self.capacity = capacity
        self.base = 0  # stream offset of data[0]
        self.data = bytearray()
        self._run_starts: list[int] = []
        self._run_prios: list[Optional[int]] = []

    @property
    def end(self) -> int:
        return self.base + len(self.data)

    @property
    def occupied(self) -> int:
        return len(self.data)

    @property
    def space(self) -> int:
        return self.capacity - len(self.data)

    def append(self, payload: bytes, priority: Optional[int]) -> int:
        offset = self.end
        if not self._run_prios or self._run_prios[-1] != priority:
            self._run_starts.append(offset)
            self._run_prios.append(priority)
        self.data += payload
        return offset

    def priority_at(self, offset: int) -> Optional[int]:
        i = bisect.bisect_right(self._run_starts, offset) - 1
        return self._run_prios[i]

    def run_end(self, offset: int) -> int:
        i = bisect.bisect_right(self._run_starts, offset)
        return self._run_starts[i] if i < len(self._run_starts) else self.end

    def slice(self, start: int, end: int) -> bytes:
        return bytes(self.data[start - self.base:end - self.base])

    def release(self, upto: int) -> int:
        """Drop acknowledged bytes below ``upto``; returns bytes freed."""
        freed = upto - self.base
        if freed <= 0:
            return 0
        del self.data[:freed]
        self.base = upto
        i = bisect.bisect_right(self._run_starts, upto) - 1
        if i > 0:
            del self._run_starts[:i]
            del self._run_prios[:i]
        return freed


class Sender:
    def __init__(self, engine: Engine, send_packet: Callable[[Packet], bool],
                 cc: BbrLite, mss: int = DEFAULT_MSS,
                 buffer_capacity: int = DEFAULT_SEND_BUFFER,
                 rtt: Optional[RttEstimator] = None, name: str = "sender"):
        self.engine = engine
        self.send_packet = send_packet
        self.cc = cc
        self.mss = mss
        self.name = name
        self.buffer = SendBuffer(buffer_capacity)
        self.rtt = rtt or RttEstimator()
        self.established = False

        self.snd_una = 0
        self.snd_nxt = 0
        self.records: OrderedDict[int, TxRecord] = OrderedDict()

        self.delivered = 0
        self.delivered_time = 0
        self.first_sent_time = 0
        self.app_limited_until = 0

        self.dupacks = 0
        self.recovery_point: Optional[int] = None
        self.rto_timer: Optional[Event] = None
        self.pacing_timer: Optional[Event] = None
        self._sending = False

        self.segments_sent = 0
        self.retransmits = 0
        self.fast_retransmits = 0
        self.dup_acks = 0
        self.rto_fires = 0
        self.protocol_errors = 0
        self.wire_bytes_sent = 0

        self._buffer_space_cbs: list[Callable[[], None]] = []
        self._send_ready_cbs: list[Callable[[], None]] = []
        self.transmit_hooks: list[Callable[[int, int, int, bool], None]] = []
        self.wire_trace: Optional[TextIO] = None

    # -- application side ------------------------------------------------

    @property
    def unsent(self) -> int:
        return self.buffer.end - self.snd_nxt

    @property
    def in_flight(self) -> int:
        return self.snd_nxt - self.snd_una

    @property
    def stream_end(self) -> int:
        return self.buffer.end

    def on_buffer_space(self, callback: Callable[[], None]) -> None:
        """Call ``callback`` whenever an ACK frees send-buffer space."""
        self._buffer_space_cbs.append(callback)

    def on_send_ready(self, callback: Callable[[], None]) -> None:
        """Call ``callback`` when the send budget allows a segment but nothing is staged."""
        self._send_ready_cbs.append(callback)

    def feed(self, payload: bytes, priority: Optional[int] = None, push: bool = True) -> int:
        """Stage one piece of at most MSS bytes; all or nothing.

        With ``push=False`` the caller is responsible for calling
        :meth:`try_send` once its own bookkeeping is done.
        """
        if not payload:
            raise FeedError("empty payload")
        if len(payload) > self.mss:
            raise FeedError(f"piece of {len(payload)} bytes exceeds MSS {self.mss}")
        if self.buffer.space < len(payload):
            return 0
        self.buffer.append(payload, priority)
        if push:
            self.try_send()
        return len(payload)

    def write(self, data: bytes, priority: Optional[int] = None) -> int:
        """Socket-style write: accept as much as fits, return the count."""
        n = min(len(data), self.buffer.space)
        if n > 0:
            self.buffer.append(bytes(data[:n]), priority)
            self.try_send()
        return n

    def connect(self, setup_delay: int) -> None:
        """Open the connection after a fixed handshake cost."""
        self.engine.schedule_in(setup_delay, self._established, self.name, "established")

    def _established(self) -> None:
        self.established = True
        self.first_sent_time = self.delivered_time = self.engine.now
        self.try_send()

    # -- send path -------------------------------------------------------

    def try_send(self) -> None:
        if not self.established or self._sending:
            return
        self._sending = True
        try:
            self._send_loop()
        finally:
            self._sending = False

    def _send_loop(self) -> None:
        now = self.engine.now
        while True:
            budget = self.cc.send_budget(self.in_flight, now)
            if not budget.allowed:
                return
            if budget.next_send_time > now:
                self._arm_pacing(budget.next_send_time)
                return
            if self.unsent == 0:
                for cb in self._send_ready_cbs:
                    cb()
                if self.unsent == 0:
                    if self.in_flight + self.mss <= self.cc.cwnd:
                        self.app_limited_until = max(self.delivered + self.in_flight, 1)
                    return
            self._send_new()

    def _arm_pacing(self, at: int) -> None:
        if self.pacing_timer is not None and self.pacing_timer.pending:
            if self.pacing_timer.fire_at <= at:
                return
            self.engine.cancel(self.pacing_timer)
        self.pacing_timer = self.engine.schedule(at, self.try_send, self.name, "pacing")

    def _send_new(self) -> None:
        seq = self.snd_nxt
        end = min(seq + self.mss, self.buffer.run_end(seq), self.buffer.end)
        priority = self.buffer.priority_at(seq)
        now = self.engine.now
        if self.in_flight == 0:
            self.first_sent_time = self.delivered_time = now
        rec = TxRecord(seq, end, priority, now, self.delivered, self.delivered_time,
                       self.first_sent_time, self.app_limited_until > 0)
        self.records[seq] = rec
        self.snd_nxt = end
        self.cc.on_send(now, end - seq)
        self._transmit(rec, retransmit=False)
        if self.rto_timer is None or not self.rto_timer.pending:
            self._arm_rto()

    def _transmit(self, rec: TxRecord, retransmit: bool) -> None:
        seg = Segment(SegmentHeader(seq=rec.seq, flags=FLAG_ACK, priority=rec.priority),
                      self.buffer.slice(rec.seq, rec.end))
        data = encode_segment(seg)
        if self.wire_trace is not None:
            self.wire_trace.write(f"{self.engine.now} {self.name} tx seq={rec.seq} len={rec.length}\n"
                                  f"{hexdump(data)}\n")
        self.segments_sent += 1
        self.wire_bytes_sent += len(data)
        for hook in self.transmit_hooks:
            hook(self.engine.now, rec.seq, rec.end, retransmit)
        self.send_packet(Packet(data))

    def _retransmit(self, seq: int) -> None:
        rec = self.records[seq]
        now = self.engine.now
        rec.retransmitted = True
        rec.sent_time = now
        rec.delivered = self.delivered
        rec.delivered_time = self.delivered_time
        rec.first_sent_time = self.first_sent_time
        self.retransmits += 1
        self._transmit(rec, retransmit=True)

    # -- timers ----------------------------------------------------------

    def _arm_rto(self) -> None:
        self.engine.cancel(self.rto_timer)
        self.rto_timer = self.engine.schedule_in(self.rtt.rto, self._on_rto, self.name, "rto")

    def _on_rto(self) -> None:
        self.rto_timer = None
        if self.in_flight == 0:
            return
        self.rto_fires += 1
        self.rtt = self.rtt.backed_off()
        self.dupacks = 0
        self.recovery_point = self.snd_nxt
        self._retransmit(self.snd_una)
        self._arm_rto()

    # -- ACK path --------------------------------------------------------

    def receive(self, packet: Packet) -> None:
        seg = decode_segment(packet.data)
        if self.wire_trace is not None:
            self.wire_trace.write(f"{self.engine.now} {self.name} rx ack={seg.header.ack}\n"
                                  f"{hexdump(packet.data)}\n")
        self.on_ack(seg.header.ack)

    def on_ack(self, ackno: int) -> AckInfo:
        now = self.engine.now
        if ackno > self.snd_nxt:
            self.protocol_errors += 1
            return AckInfo(self.snd_una, None, 0, False)
        if ackno <= self.snd_una:
            dup = ackno == self.snd_una and self.in_flight > 0
            if dup:
                self._on_dupack()
            return AckInfo(self.snd_una, None, 0, dup)

        newest: Optional[TxRecord] = None
        acked = 0
        while self.records:
            seq, rec = next(iter(self.records.items()))
            if rec.end > ackno:
                break
            self.records.popitem(last=False)
            acked += rec.length
            self.delivered += rec.length
            self.delivered_time = now
            if newest is None or rec.delivered >= newest.delivered:
                newest = rec
        self.snd_una = ackno
        self.dupacks = 0
        freed = self.buffer.release(ackno)

        rtt_sample = None
        if newest is not None:
            self.first_sent_time = newest.sent_time
            if not newest.retransmitted:
                rtt_sample = now - newest.sent_time
                self.rtt = rto_update(self.rtt, rtt_sample)
            if self.app_limited_until and self.delivered > self.app_limited_until:
                self.app_limited_until = 0
            send_elapsed = newest.sent_time - newest.first_sent_time
            ack_elapsed = self.delivered_time - newest.delivered_time
            self.cc.on_delivery(DeliverySample(
                delivered_bytes=self.delivered - newest.delivered,
                interval=max(send_elapsed, ack_elapsed, 1),
                rtt=rtt_sample,
                app_limited=newest.app_limited,
                prior_delivered=newest.delivered,
                delivered_total=self.delivered,
                in_flight=self.in_flight,
                acked_bytes=acked,
                now=now,
            ))

        if self.recovery_point is not None:
            if ackno < self.recovery_point:
                self._retransmit(self.snd_una)
            else:
                self.recovery_point = None

        if self.in_flight > 0:
            self._arm_rto()
        else:
            self.engine.cancel(self.rto_timer)
            self.rto_timer = None

        if freed > 0:
            for cb in self._buffer_space_cbs:
                cb()
        self.try_send()
        return AckInfo(ackno, rtt_sample, acked, False)

    def _on_dupack(self) -> None:
        self.dup_acks += 1
        self.dupacks += 1
        if self.dupacks == DUPACK_THRESHOLD and self.recovery_point is None:
            self.fast_retransmits += 1
            self.recovery_point = self.snd_nxt
            self._retransmit(self.snd_una)
            self._arm_rto()

    def counters(self) -> dict:
        return {
            "segments_sent": self.segments_sent,
            "retransmits": self.retransmits,
            "fast_retransmits": self.fast_retransmits,
            "dup_acks": self.dup_acks,
            "rto_fires": self.rto_fires,
            "protocol_errors": self.protocol_errors,
            "wire_bytes_sent": self.wire_bytes_sent,
        }


class Receiver:
    """In-order reassembly; one cumulative ACK per arriving data segment."""

    def __init__(self, engine: Engine, send_packet: Callable[[Packet], bool],
                 name: str = "receiver"):
        self.engine = engine
        self.send_packet = send_packet
        self.name = name
        self.rcv_nxt = 0
        self.stream = bytearray()
        self._ooo: dict[int, bytes] = {}
        self.priority_counts = [0] * 5
        self.untagged_segments = 0
        self.duplicate_segments = 0
        self.deliver_hooks: list[Callable[[int, int], None]] = []

    def receive(self, packet: Packet) -> None:
        seg = decode_segment(packet.data)
        if seg.header.priority is None:
            self.untagged_segments += 1
        else:
            self.priority_counts[seg.header.priority] += 1
        seq, payload = seg.seq, seg.payload
        if payload:
            if seq == self.rcv_nxt:
                self._accept(payload)
                while self.rcv_nxt in self._ooo:
                    self._accept(self._ooo.pop(self.rcv_nxt))
                for hook in self.deliver_hooks:
                    hook(self.engine.now, self.rcv_nxt)
            elif seq > self.rcv_nxt:
                self._ooo.setdefault(seq, payload)
            else:
                self.duplicate_segments += 1
        ack = Segment(SegmentHeader(seq=0, ack=self.rcv_nxt, flags=FLAG_ACK))
        self.send_packet(Packet(encode_segment(ack)))

    def _accept(self, payload: bytes) -> None:
        self.stream += payload
        self.rcv_nxt += len(payload)
