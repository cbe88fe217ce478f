"""Priority queues with hysteresis-debt fairness.

Five FIFO queues, 0 the most urgent. Sending from queue ``j`` charges its
debt and pays back every more-urgent queue by ``n * M_j``. A queue whose
debt reaches its high watermark stops being eligible until its debt falls
below the low watermark. When every backlogged queue is in debt the debts
are scaled down in proportion to the queues' payback multipliers.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

NUM_QUEUES = 5
KB = 1024
UNBOUNDED = math.inf

Number = Union[int, float, Fraction]


class UsageError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


class QueueState(str, enum.Enum):
    ELIGIBLE = "e"
    IN_DEBT = "i"


def check_priority(priority) -> int:
    if isinstance(priority, bool) or not isinstance(priority, int) \
            or not 0 <= priority < NUM_QUEUES:
        raise UsageError(f"priority must be an integer in 0..{NUM_QUEUES - 1}, got {priority!r}")
    return priority


@dataclass(frozen=True)
class QueueFairnessConfig:
    high: Number  # bytes; UNBOUNDED means the queue never goes into debt
    low: Number
    payback: Fraction

    def __post_init__(self):
        if not 0 <= self.low <= self.high:
            raise UsageError(f"watermarks need 0 <= low <= high, got low={self.low} high={self.high}")
        if self.payback <= 0:
            raise UsageError(f"payback multiplier must be positive, got {self.payback}")


@dataclass(frozen=True)
class FairnessConfig:
    queues: tuple[QueueFairnessConfig, ...]

    def __post_init__(self):
        if len(self.queues) != NUM_QUEUES:
            raise UsageError(f"need {NUM_QUEUES} queue configs, got {len(self.queues)}")

    @classmethod
    def build(cls, high: Sequence[Optional[Number]], low: Optional[Sequence[Number]] = None,
              payback: Sequence[Number] = (1, 1, 2, 4, 8)) -> "FairnessConfig":
        """``None`` in ``high`` means unbounded; ``low`` defaults to half of ``high``."""
        highs = [UNBOUNDED if h is None else h for h in high]
        if low is None:
            lows = [UNBOUNDED if h == UNBOUNDED else h // 2 for h in highs]
        else:
            lows = list(low)
        return cls(tuple(QueueFairnessConfig(h, l, Fraction(m))
                         for h, l, m in zip(highs, lows, payback, strict=True)))

    @classmethod
    def default(cls) -> "FairnessConfig":
        # M_0 is never used: nothing sits above queue 0 to pay back
        return cls.build(high=[None, 256 * KB, 128 * KB, 64 * KB, 32 * KB],
                         payback=[1, 1, 2, 4, 8])

    @property
    def high(self) -> list:
        return [q.high for q in self.queues]

    @property
    def low(self) -> list:
        return [q.low for q in self.queues]

    @property
    def payback(self) -> list[Fraction]:
        return [q.payback for q in self.queues]

    def to_dict(self) -> dict:
        def num(x):
            if x == UNBOUNDED:
                return None
            return str(x) if isinstance(x, Fraction) and x.denominator != 1 else int(x)
        return {"high": [num(h) for h in self.high], "low": [num(l) for l in self.low],
                "payback": [num(m) for m in self.payback]}


@dataclass
class DebtLedger:
    debt: list[int] = field(default_factory=lambda: [0] * NUM_QUEUES)
    state: list[QueueState] = field(default_factory=lambda: [QueueState.ELIGIBLE] * NUM_QUEUES)

    def eligible(self, i: int) -> bool:
        return self.state[i] is QueueState.ELIGIBLE

    def copy(self) -> "DebtLedger":
        return DebtLedger(list(self.debt), list(self.state))


@dataclass
class Chunk:
    payload: bytes
    priority: int
    enqueue_time: int
    seq_within_priority: int
    tag: Optional[str] = None
    offset: int = 0  # bytes of payload already committed

    @property
    def remaining(self) -> int:
        return len(self.payload) - self.offset


def _trunc(x: Fraction) -> int:
    return math.trunc(x)


def commit_debt(ledger: DebtLedger, config: FairnessConfig, j: int, n: int) -> DebtLedger:
    """Debt update after ``n`` bytes left queue ``j``; mutates and returns ``ledger``."""
    ledger.debt[j] += n
    if ledger.debt[j] >= config.queues[j].high:
        ledger.state[j] = QueueState.IN_DEBT
    payback = _trunc(n * config.queues[j].payback)
    for i in range(j):
        ledger.debt[i] = max(0, ledger.debt[i] - payback)
        if ledger.debt[i] < config.queues[i].low:
            ledger.state[i] = QueueState.ELIGIBLE
    return ledger


def resolve_deadlock(ledger: DebtLedger, config: FairnessConfig,
                     backlogged: Sequence[int]) -> DebtLedger:
    """Scale down the debts of the backlogged queues until one is eligible.

    Each pass sets ``D_i = trunc(D_i * M_i / M_total)`` over the backlogged
    in-debt queues. A lone queue (ratio 1) or a pass that changes nothing is
    a fixed point; then the most urgent backlogged queue is made eligible.
    """
    backlogged = sorted(backlogged)
    if any(ledger.eligible(i) for i in backlogged):
        raise InvariantViolation("resolve_deadlock called while a backlogged queue is eligible")
    if not backlogged:
        return ledger
    total = sum(config.queues[k].payback for k in backlogged)
    while True:
        before = [ledger.debt[i] for i in backlogged]
        for i in backlogged:
            ledger.debt[i] = _trunc(ledger.debt[i] * config.queues[i].payback / total)
            if ledger.debt[i] < config.queues[i].low:
                ledger.state[i] = QueueState.ELIGIBLE
        if any(ledger.eligible(i) for i in backlogged):
            return ledger
        if [ledger.debt[i] for i in backlogged] == before:
            ledger.state[backlogged[0]] = QueueState.ELIGIBLE
            return ledger


class Conductor:
    """Queues, ledger and the selection rule; knows nothing about the transport."""

    def __init__(self, fairness: Optional[FairnessConfig] = None):
        self.fairness = fairness or FairnessConfig.default()
        self.queues: list[deque[Chunk]] = [deque() for _ in range(NUM_QUEUES)]
        self.ledger = DebtLedger()
        self._seq = [0] * NUM_QUEUES
        self.queued_bytes = [0] * NUM_QUEUES
        self.intercepted = [0] * NUM_QUEUES
        self.committed = [0] * NUM_QUEUES
        self.shed = [0] * NUM_QUEUES
        self.deadlocks = 0

    def intercept(self, payload: bytes, priority: int, now: int = 0,
                  tag: Optional[str] = None) -> Chunk:
        check_priority(priority)
        if not payload:
            raise UsageError("cannot enqueue an empty message")
        chunk = Chunk(bytes(payload), priority, now, self._seq[priority], tag)
        self._seq[priority] += 1
        self.queues[priority].append(chunk)
        self.queued_bytes[priority] += len(payload)
        self.intercepted[priority] += len(payload)
        return chunk

    def backlogged(self) -> list[int]:
        return [i for i in range(NUM_QUEUES) if self.queues[i]]

    @property
    def total_queued(self) -> int:
        return sum(self.queued_bytes)

    def _front_slice(self, j: int, mss: int) -> bytes:
        out = bytearray()
        for chunk in self.queues[j]:
            take = min(chunk.remaining, mss - len(out))
            out += chunk.payload[chunk.offset:chunk.offset + take]
            if len(out) == mss:
                break
        return bytes(out)

    def select_next(self, mss: int) -> Optional[tuple[int, bytes]]:
        """Front slice of the most urgent eligible backlogged queue (not removed)."""
        backlogged = self.backlogged()
        if not backlogged:
            return None
        for j in backlogged:
            if self.ledger.eligible(j):
                return j, self._front_slice(j, mss)
        self.deadlocks += 1
        resolve_deadlock(self.ledger, self.fairness, backlogged)
        return self.select_next(mss)

    def commit_send(self, j: int, n: int) -> list[tuple[Optional[str], int]]:
        """Remove ``n`` front bytes of queue ``j`` and charge the ledger.

        Returns the (tag, bytes) pieces the slice was cut from, in order.
        """
        if n <= 0 or n > self.queued_bytes[j]:
            raise InvariantViolation(f"commit of {n} bytes from queue {j} "
                                     f"holding {self.queued_bytes[j]}")
        pieces = []
        left = n
        q = self.queues[j]
        while left:
            chunk = q[0]
            take = min(left, chunk.remaining)
            chunk.offset += take
            left -= take
            pieces.append((chunk.tag, take))
            if chunk.remaining == 0:
                q.popleft()
        self.queued_bytes[j] -= n
        self.committed[j] += n
        commit_debt(self.ledger, self.fairness, j, n)
        return pieces

    def shed_below(self, threshold: int) -> int:
        """Drop everything queued with priority strictly lower than ``threshold``."""
        check_priority(threshold)
        dropped = 0
        for i in range(threshold + 1, NUM_QUEUES):
            dropped += self._drop_queue(i)
        return dropped

    def _drop_queue(self, i: int) -> int:
        n = self.queued_bytes[i]
        self.queues[i].clear()
        self.queued_bytes[i] = 0
        self.shed[i] += n
        return n

    def shed_on_congestion(self, bytes_needed: int) -> int:
        """Drop whole chunks, oldest first, from the least urgent queues.

        Stops once ``bytes_needed`` is reached; queue 0 is never touched.
        """
        dropped = 0
        for i in range(NUM_QUEUES - 1, 0, -1):
            q = self.queues[i]
            while q and dropped < bytes_needed:
                n = q.popleft().remaining
                self.queued_bytes[i] -= n
                self.shed[i] += n
                dropped += n
            if dropped >= bytes_needed:
                break
        return dropped

    def trace_line(self, now: int, j: int, n: int) -> str:
        d = ",".join(str(x) for x in self.ledger.debt)
        s = ",".join(st.value for st in self.ledger.state)
        return f"{now} q={j} n={n} D=[{d}] S=[{s}]"
