"""BBR-lite: a model-based congestion controller.

The controller keeps a windowed-max bottleneck bandwidth estimate and a
windowed-min round-trip propagation estimate, and turns them into a pacing
rate and a congestion window. It only ever sees ACK-derived delivery
samples.
"""

from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass
from typing import Optional

from .engine import NS_PER_S, ms

HIGH_GAIN = 2.885  # 2/ln(2)
DRAIN_GAIN = 1 / HIGH_GAIN
PROBE_BW_CWND_GAIN = 2.0
PACING_GAIN_CYCLE = (1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
BW_WINDOW_ROUNDS = 10
RTPROP_WINDOW = 10 * NS_PER_S
PROBE_RTT_DURATION = ms(200)
FULL_BW_GROWTH = 1.25
FULL_BW_ROUNDS = 3
INITIAL_CWND_SEGMENTS = 10
MIN_CWND_SEGMENTS = 4
INITIAL_RTT_GUESS = ms(100)


class Phase(str, enum.Enum):
    STARTUP = "Startup"
    DRAIN = "Drain"
    PROBE_BW = "ProbeBW"
    PROBE_RTT = "ProbeRTT"


@dataclass(frozen=True)
class DeliverySample:
    delivered_bytes: int
    interval: int  # ns
    rtt: Optional[int]  # ns; None when the acked segment was retransmitted
    app_limited: bool = False
    prior_delivered: int = 0  # connection-wide delivered count when the segment left
    delivered_total: int = 0
    in_flight: int = 0  # after this ACK
    acked_bytes: int = 0
    now: int = 0

    def __post_init__(self):
        if self.interval <= 0:
            raise ValueError("delivery sample interval must be positive")

    @property
    def rate(self) -> float:
        """Delivery rate in bits/s."""
        return self.delivered_bytes * 8 * NS_PER_S / self.interval


@dataclass(frozen=True)
class CcState:
    btl_bw: float
    rt_prop: Optional[int]
    phase: Phase
    pacing_gain: float
    cwnd_gain: float
    cycle_index: int
    pacing_rate: float
    cwnd: int


@dataclass(frozen=True)
class SendBudget:
    next_send_time: int
    allowed: bool


class MaxFilter:
    """Sliding-window maximum keyed by round count."""

    def __init__(self, window: int):
        self.window = window
        self._entries: deque[tuple[int, float]] = deque()  # (round, value), values decreasing

    def update(self, rnd: int, value: float) -> float:
        while self._entries and self._entries[-1][1] <= value:
            self._entries.pop()
        self._entries.append((rnd, value))
        self.expire(rnd)
        return self.best

    def expire(self, rnd: int) -> None:
        while len(self._entries) > 1 and self._entries[0][0] <= rnd - self.window:
            self._entries.popleft()

    @property
    def best(self) -> float:
        return self._entries[0][1] if self._entries else 0.0


class BbrLite:
    def __init__(self, mss: int = 1448, rng: Optional[random.Random] = None,
                 initial_rtt: int = INITIAL_RTT_GUESS):
        self.mss = mss
        self.rng = rng or random.Random(0)
        self.initial_window = INITIAL_CWND_SEGMENTS * mss
        self.min_cwnd = MIN_CWND_SEGMENTS * mss

        self.bw_filter = MaxFilter(BW_WINDOW_ROUNDS)
        self.rt_prop: Optional[int] = None
        self.rt_prop_stamp = 0

        self.phase = Phase.STARTUP
        self.pacing_gain = HIGH_GAIN
        self.cwnd_gain = HIGH_GAIN
        self.cycle_index = 0
        self.cycle_stamp = 0

        self.round_count = 0
        self.next_round_delivered = 0
        self.round_start = False
        self.full_bw = 0.0
        self.full_bw_count = 0
        self.filled_pipe = False

        self.probe_rtt_done: Optional[int] = None
        self.prior_cwnd = 0

        self.cwnd = self.initial_window
        self.pacing_rate = HIGH_GAIN * self.initial_window * 8 * NS_PER_S / initial_rtt
        self.last_send_time: Optional[int] = None
        self.last_send_bytes = mss

        self.history: Optional[list[tuple]] = None

    # -- model -----------------------------------------------------------

    @property
    def btl_bw(self) -> float:
        return self.bw_filter.best

    def bdp(self, gain: float = 1.0) -> int:
        """Bytes in flight the model says fill the pipe at ``gain``."""
        if self.rt_prop is None or self.btl_bw <= 0:
            return self.initial_window
        return int(gain * self.btl_bw * self.rt_prop / (8 * NS_PER_S))

    def cwnd_target(self) -> int:
        return max(self.bdp(self.cwnd_gain), self.min_cwnd)

    def state(self) -> CcState:
        return CcState(self.btl_bw, self.rt_prop, self.phase, self.pacing_gain,
                       self.cwnd_gain, self.cycle_index, self.pacing_rate, self.cwnd)

    def record_history(self) -> None:
        self.history = []

    # -- ACK path --------------------------------------------------------

    def on_delivery(self, s: DeliverySample) -> CcState:
        now = s.now
        self._update_round(s)
        if not s.app_limited:
            self.bw_filter.update(self.round_count, s.rate)
        else:
            self.bw_filter.expire(self.round_count)

        rt_prop_expired = now > self.rt_prop_stamp + RTPROP_WINDOW
        if s.rtt is not None and (self.rt_prop is None or s.rtt <= self.rt_prop or rt_prop_expired):
            self.rt_prop = s.rtt
            self.rt_prop_stamp = now

        if self.phase is Phase.STARTUP:
            self._check_full_pipe(s)
            if self.filled_pipe:
                self._enter(Phase.DRAIN, now)
        if self.phase is Phase.DRAIN and s.in_flight <= self.bdp():
            self._enter_probe_bw(now)
        if self.phase is Phase.PROBE_BW and self.rt_prop is not None \
                and now - self.cycle_stamp > self.rt_prop:
            self.cycle_index = (self.cycle_index + 1) % len(PACING_GAIN_CYCLE)
            self.cycle_stamp = now
            self.pacing_gain = PACING_GAIN_CYCLE[self.cycle_index]
        self._check_probe_rtt(s, rt_prop_expired)

        self._set_pacing_rate()
        self._set_cwnd(s)
        if self.history is not None:
            self.history.append((now, self.btl_bw, self.rt_prop, self.phase.value,
                                 self.pacing_rate, self.cwnd))
        return self.state()

    def _update_round(self, s: DeliverySample) -> None:
        self.round_start = False
        if s.prior_delivered >= self.next_round_delivered:
            self.next_round_delivered = s.delivered_total
            self.round_count += 1
            self.round_start = True

    def _check_full_pipe(self, s: DeliverySample) -> None:
        if self.filled_pipe or not self.round_start or s.app_limited:
            return
        if self.btl_bw >= self.full_bw * FULL_BW_GROWTH:
            self.full_bw = self.btl_bw
            self.full_bw_count = 0
            return
        self.full_bw_count += 1
        if self.full_bw_count >= FULL_BW_ROUNDS:
            self.filled_pipe = True

    def _enter(self, phase: Phase, now: int) -> None:
        self.phase = phase
        if phase is Phase.STARTUP:
            self.pacing_gain = self.cwnd_gain = HIGH_GAIN
        elif phase is Phase.DRAIN:
            self.pacing_gain, self.cwnd_gain = DRAIN_GAIN, HIGH_GAIN
        elif phase is Phase.PROBE_RTT:
            self.pacing_gain, self.cwnd_gain = 1.0, 1.0

    def _enter_probe_bw(self, now: int) -> None:
        self.phase = Phase.PROBE_BW
        self.cwnd_gain = PROBE_BW_CWND_GAIN
        # any phase but the draining one
        self.cycle_index = self.rng.choice([0, 2, 3, 4, 5, 6, 7])
        self.pacing_gain = PACING_GAIN_CYCLE[self.cycle_index]
        self.cycle_stamp = now

    def _check_probe_rtt(self, s: DeliverySample, rt_prop_expired: bool) -> None:
        now = s.now
        if self.phase is not Phase.PROBE_RTT and rt_prop_expired and self.rt_prop is not None:
            self.prior_cwnd = self.cwnd
            self._enter(Phase.PROBE_RTT, now)
            self.probe_rtt_done = None
            return
        if self.phase is not Phase.PROBE_RTT:
            return
        if self.probe_rtt_done is None and s.in_flight <= self.min_cwnd:
            self.probe_rtt_done = now + PROBE_RTT_DURATION
        elif self.probe_rtt_done is not None and now >= self.probe_rtt_done:
            self.rt_prop_stamp = now
            self.cwnd = max(self.cwnd, self.prior_cwnd)
            if self.filled_pipe:
                self._enter_probe_bw(now)
            else:
                self._enter(Phase.STARTUP, now)

    def _set_pacing_rate(self) -> None:
        if self.btl_bw <= 0:
            return
        rate = self.pacing_gain * self.btl_bw
        if self.filled_pipe or rate > self.pacing_rate:
            self.pacing_rate = rate

    def _set_cwnd(self, s: DeliverySample) -> None:
        target = self.cwnd_target()
        if self.filled_pipe:
            self.cwnd = min(self.cwnd + s.acked_bytes, target)
        elif self.cwnd < target or s.delivered_total < self.initial_window:
            self.cwnd += s.acked_bytes
        self.cwnd = max(self.cwnd, self.min_cwnd)
        if self.phase is Phase.PROBE_RTT:
            self.cwnd = min(self.cwnd, self.min_cwnd)

    # -- send path -------------------------------------------------------

    def pacing_gap(self, nbytes: int) -> int:
        return -(-nbytes * 8 * NS_PER_S // max(1, int(self.pacing_rate)))

    def send_budget(self, in_flight: int, now: int) -> SendBudget:
        if self.last_send_time is None:
            next_send = now
        else:
            next_send = self.last_send_time + self.pacing_gap(self.last_send_bytes)
        return SendBudget(next_send, in_flight + self.mss <= self.cwnd)

    def on_send(self, now: int, nbytes: int) -> None:
        self.last_send_time = now
        self.last_send_bytes = nbytes
