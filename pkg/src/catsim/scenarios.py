"""Small scripted scenarios used by the property checks and the scripts/ runners.

Each function builds its own stack from an :class:`ExperimentConfig`, so the
topology and transport parameters stay the same as the main experiment.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .bbr import Phase
from .config import ExperimentConfig, paper_preset
from .engine import NS_PER_S, ms
from .experiment import attach_workload, build_stack, expected_stream, run_stack
from .sockets import CatsSocket
from .workload import Group, WorkloadSpec, make_payloads


@dataclass
class StarvationResult:
    high0: Optional[int]
    bulk_bytes: int
    bulk_committed: int
    bulk_completion_ns: Optional[int]
    urgent_committed: int
    deadlock_resolutions: int
    duration_ns: int

    @property
    def bulk_completed(self) -> bool:
        return self.bulk_completion_ns is not None


def starvation(high0: Optional[int] = 32 * 1024, duration_ns: int = 4 * NS_PER_S,
               urgent_size: int = 5000, urgent_interval_ns: int = ms(10),
               bulk_size: int = 50 * 1024, seed: int = 1,
               base: Optional[ExperimentConfig] = None) -> StarvationResult:
    """P0 messages arriving forever at ``urgent_size/urgent_interval`` plus one P4 object.

    With the defaults P0 offers 4 Mbit/s, twice the bottleneck. ``high0=None``
    removes the P0 watermark, which turns the conductor into strict priority.
    """
    cfg = dataclasses.replace(base or paper_preset(), seed=seed)
    high = list(cfg.fairness.high)
    high[0] = high0
    cfg.fairness = dataclasses.replace(cfg.fairness, high=high, low=None)
    stack = build_stack(cfg, "cats")
    sock = stack.socket
    assert isinstance(sock, CatsSocket)
    payloads = make_payloads(WorkloadSpec((Group(4, bulk_size, "bulk"),), (0,)), seed)
    eng = stack.engine
    eng.schedule(0, lambda: sock.send(payloads["bulk"], 4, tag="bulk"), "workload", "bulk")

    def urgent():
        sock.send(bytes(urgent_size), 0, tag="urgent")
        if eng.now + urgent_interval_ns < duration_ns:
            eng.schedule_in(urgent_interval_ns, urgent, "workload", "urgent")

    eng.schedule(0, urgent, "workload", "urgent")
    eng.run_until(duration_ns)
    c = sock.conductor
    return StarvationResult(high0, bulk_size, c.committed[4], stack.tracker.completion("bulk"),
                            c.committed[0], c.deadlocks, duration_ns)


@dataclass
class FifoEquivalence:
    cats_stream: bytes
    baseline_stream: bytes
    cats_completion_ns: int
    baseline_completion_ns: int

    @property
    def same_order(self) -> bool:
        return self.cats_stream == self.baseline_stream

    @property
    def completion_gap(self) -> float:
        return abs(self.cats_completion_ns - self.baseline_completion_ns) / self.baseline_completion_ns


def fifo_equivalence(priority: int = 2, sizes: tuple[int, ...] = (40_000, 90_000, 25_000),
                     seed: int = 1, base: Optional[ExperimentConfig] = None) -> FifoEquivalence:
    """Same-priority messages through both sockets; compare what the receiver got."""
    cfg = dataclasses.replace(base or paper_preset(), seed=seed)
    spec = WorkloadSpec(groups=tuple(Group(priority, n, f"m{i}") for i, n in enumerate(sizes)),
                        submission_order=tuple(range(len(sizes))))
    cfg.workload = spec.to_dict()
    out = {}
    for scheme in ("cats", "baseline"):
        stack = build_stack(cfg, scheme)
        attach_workload(stack, cfg, spec)
        run_stack(stack)
        got = bytes(stack.receiver.stream)
        if got != expected_stream(stack):
            raise AssertionError(f"{scheme}: receiver stream differs from what was fed")
        done = max(stack.tracker.completion(g.label) for g in spec.groups)
        out[scheme] = (got, done)
    return FifoEquivalence(out["cats"][0], out["baseline"][0], out["cats"][1], out["baseline"][1])


@dataclass
class SteadyRate:
    start_ns: int
    end_ns: int
    wire_bytes: int
    packets: int

    @property
    def wire_bps(self) -> float:
        return self.wire_bytes * 8 * NS_PER_S / (self.end_ns - self.start_ns)


def steady_send_rate(scheme: str = "cats", seed: int = 1,
                     base: Optional[ExperimentConfig] = None) -> SteadyRate:
    """Sender output rate over the ProbeBW part of a run.

    The window opens when the controller first enters ProbeBW and closes at
    the last departure from the sender's access link.
    """
    cfg = dataclasses.replace(base or paper_preset(), seed=seed)
    stack = build_stack(cfg, scheme, {"cc": None})
    access = stack.topology.forward[0]
    access.record_departures()
    attach_workload(stack, cfg, cfg.workload_spec())
    run_stack(stack)
    start = next(h[0] for h in stack.cc.history if Phase(h[3]) is Phase.PROBE_BW)
    deps = [(t, n) for t, n in access.departures if t > start]
    return SteadyRate(start, deps[-1][0], sum(n for _, n in deps), len(deps))
