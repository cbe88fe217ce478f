"""Application-facing sockets layered on a :class:`~catsim.transport.Sender`.

``CatsSocket`` intercepts writes into the conductor's priority queues and
feeds the transport one MSS-sized piece whenever it has nothing staged.
``FifoSocket`` is the plain byte-stream baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, TextIO

from .conductor import Chunk, Conductor, FairnessConfig, UsageError, check_priority
from .engine import Engine
from .transport import Sender

# (stream offset, [(tag, nbytes), ...]) for every slice handed to the transport
FeedHook = Callable[[int, list], None]


@dataclass(frozen=True)
class CongestionShedConfig:
    enabled: bool = False
    rtt_factor: float = 4.0  # srtt must exceed this multiple of rt_prop
    rounds: int = 3  # ... continuously for this many smoothed RTTs
    shed_bytes: int = 64 * 1024


class CatsSocket:
    def __init__(self, engine: Engine, sender: Sender,
                 fairness: Optional[FairnessConfig] = None,
                 default_priority: Optional[int] = None,
                 congestion: CongestionShedConfig = CongestionShedConfig(),
                 schedule_trace: Optional[TextIO] = None):
        self.engine = engine
        self.sender = sender
        self.conductor = Conductor(fairness)
        self.default_priority = None if default_priority is None else check_priority(default_priority)
        self.congestion = congestion
        self.schedule_trace = schedule_trace
        self.feed_hooks: list[FeedHook] = []
        self.intercept_hooks: list[Callable[[str, int], None]] = []
        self.congestion_sheds = 0
        self._congested_since: Optional[int] = None
        sender.on_send_ready(self.pump)
        sender.on_buffer_space(self._on_ack_space)

    def send(self, payload: bytes, priority: Optional[int] = None,
             tag: Optional[str] = None) -> Chunk:
        """Queue a whole application message; it is never handed down directly."""
        if priority is None:
            priority = self.default_priority
        if priority is None:
            raise UsageError("message has no priority and the socket has no default")
        chunk = self.conductor.intercept(payload, priority, self.engine.now, tag)
        if tag is not None:
            for hook in self.intercept_hooks:
                hook(tag, len(payload))
        self.pump()
        self.sender.try_send()
        return chunk

    def save_data(self, threshold: int) -> int:
        """Discard queued data less urgent than ``threshold`` (user opted in to save data)."""
        return self.conductor.shed_below(threshold)

    def pump(self) -> None:
        """Stage at most one piece, and only if the transport has nothing staged."""
        if self.sender.unsent:
            return
        pick = self.conductor.select_next(self.sender.mss)
        if pick is None:
            return
        j, piece = pick
        offset = self.sender.stream_end
        if self.sender.feed(piece, j, push=False) == 0:
            return
        pieces = self.conductor.commit_send(j, len(piece))
        if self.schedule_trace is not None:
            self.schedule_trace.write(self.conductor.trace_line(self.engine.now, j, len(piece)) + "\n")
        for hook in self.feed_hooks:
            hook(offset, pieces)

    def _on_ack_space(self) -> None:
        if self.congestion.enabled:
            self._check_congestion()
        self.pump()

    def _check_congestion(self) -> None:
        est, rt_prop = self.sender.rtt, self.sender.cc.rt_prop
        if not est.initialized or rt_prop is None:
            return
        now = self.engine.now
        if est.srtt <= self.congestion.rtt_factor * rt_prop:
            self._congested_since = None
            return
        if self._congested_since is None:
            self._congested_since = now
        elif now - self._congested_since >= self.congestion.rounds * est.srtt:
            if self.conductor.shed_on_congestion(self.congestion.shed_bytes):
                self.congestion_sheds += 1
            self._congested_since = now


class FifoSocket:
    """Plain stream socket: bytes go out in write order."""

    def __init__(self, engine: Engine, sender: Sender):
        self.engine = engine
        self.sender = sender

    def write(self, data: bytes) -> int:
        return self.sender.write(data)

    def on_buffer_space(self, callback: Callable[[], None]) -> None:
        self.sender.on_buffer_space(callback)
