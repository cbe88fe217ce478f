"""Deterministic discrete-event engine.

Time is an integer count of nanoseconds. Events that fire at the same
instant run in the order they were scheduled.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, TextIO

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000

DEFAULT_EVENT_CAP = 50_000_000


def ms(value: float) -> int:
    """Milliseconds to integer nanoseconds."""
    return int(round(value * NS_PER_MS))


def to_ms(ns: int) -> float:
    return ns / NS_PER_MS


class SimulationError(RuntimeError):
    pass


@dataclass(order=True)
class Event:
    fire_at: int
    seq: int
    action: Callable[[], None] = field(compare=False)
    module: str = field(default="sim", compare=False)
    name: str = field(default="event", compare=False)
    cancelled: bool = field(default=False, compare=False)
    fired: bool = field(default=False, compare=False)

    @property
    def pending(self) -> bool:
        return not (self.cancelled or self.fired)


class Engine:
    """Single-threaded event loop over a (fire_at, seq) heap."""

    def __init__(self, trace: Optional[TextIO] = None, event_cap: int = DEFAULT_EVENT_CAP):
        self.now = 0
        self._heap: list[Event] = []
        self._seq = 0
        self.dispatched = 0
        self.event_cap = event_cap
        self.trace = trace
        self._recent: deque[str] = deque(maxlen=64)

    def schedule(self, fire_at: int, action: Callable[[], None],
                 module: str = "sim", name: str = "event") -> Event:
        if fire_at < self.now:
            raise SimulationError(
                f"cannot schedule {module}/{name} at {fire_at} ns, now is {self.now} ns")
        ev = Event(int(fire_at), self._seq, action, module, name)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def schedule_in(self, delay: int, action: Callable[[], None],
                    module: str = "sim", name: str = "event") -> Event:
        return self.schedule(self.now + delay, action, module, name)

    def cancel(self, handle: Optional[Event]) -> bool:
        if handle is None or not handle.pending:
            return False
        handle.cancelled = True
        return True

    def _pop_live(self) -> Optional[Event]:
        while self._heap and self._heap[0].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0] if self._heap else None

    def peek_time(self) -> Optional[int]:
        ev = self._pop_live()
        return None if ev is None else ev.fire_at

    @property
    def pending(self) -> int:
        return sum(1 for ev in self._heap if not ev.cancelled)

    def _dispatch(self, ev: Event) -> None:
        heapq.heappop(self._heap)
        self.now = ev.fire_at
        ev.fired = True
        self.dispatched += 1
        line = f"{ev.fire_at} {ev.module} {ev.name}"
        self._recent.append(line)
        if self.trace is not None:
            self.trace.write(line + "\n")
        if self.dispatched > self.event_cap:
            dump = "\n".join(self._recent)
            raise SimulationError(
                f"event cap of {self.event_cap} exceeded; last events:\n{dump}")
        ev.action()

    def run_until(self, deadline: int) -> int:
        """Dispatch every event with fire_at <= deadline.

        Returns the time of the last dispatched event, or ``deadline`` when
        nothing was dispatched.
        """
        last = None
        while True:
            ev = self._pop_live()
            if ev is None or ev.fire_at > deadline:
                break
            self._dispatch(ev)
            last = ev.fire_at
        return deadline if last is None else last

    def run(self) -> int:
        """Run until the queue drains; returns the final clock value."""
        while True:
            ev = self._pop_live()
            if ev is None:
                return self.now
            self._dispatch(ev)
