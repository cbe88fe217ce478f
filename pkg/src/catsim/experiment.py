"""Wire a full scenario together and turn a run into a RunReport."""

from __future__ import annotations

import random
from contextlib import ExitStack
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO, Union

from .bbr import BbrLite
from .config import ExperimentConfig
from .engine import Engine, SimulationError
from .metrics import GroupResult, RunReport, StreamTracker, effective_throughput, ns_to_ms
from .net import Dumbbell, build_dumbbell, probe_rtt
from .sockets import CatsSocket, FifoSocket
from .transport import Receiver, Sender
from .workload import (BaselineFeeder, WorkloadSpec, drive_baseline, drive_cats,
                       make_payloads, stream_layout)

ASSUMPTIONS = {
    "kb_bytes": 1024,
    "access_links": "symmetric; rate and delay from topology config, remaining RTT on the bottleneck",
    "bottleneck_queue": "drop-tail, capacity from topology.queue_capacity (packets)",
    "header_overhead_bytes": 40,
    "priority_option_on_wire_bytes": 4,
    "loss_recovery": "fast retransmit on 3 dup ACKs + NewReno-style partial-ACK retransmit + RTO backoff (no PRR)",
    "acks": "receiver ACKs every segment (no delayed ACKs)",
    "setup": "handshake modeled as a fixed setup_rtts x RTT delay; completion times include it",
    "congestion_control": "BBR-lite: Startup/Drain/ProbeBW/ProbeRTT, gains 2.885 and [1.25,0.75,1x6]",
    "effective_throughput": "group bytes*8 / (completion - submission); transfer_throughput uses first transmit",
    "cats_feeding": "one MSS-sized piece staged only when the transport has nothing unsent",
}


@dataclass
class Stack:
    engine: Engine
    topology: Dumbbell
    sender: Sender
    receiver: Receiver
    tracker: StreamTracker
    cc: BbrLite
    rng: random.Random
    socket: Union[CatsSocket, FifoSocket, None] = None
    feeder: Optional[BaselineFeeder] = None
    spec: Optional[WorkloadSpec] = None
    payloads: dict = field(default_factory=dict)


def build_stack(cfg: ExperimentConfig, scheme: Optional[str] = None,
                traces: Optional[dict[str, TextIO]] = None) -> Stack:
    """Engine, dumbbell, endpoints and socket for ``scheme``; no workload attached."""
    traces = traces or {}
    scheme = scheme or cfg.scheme
    engine = Engine(trace=traces.get("events"), event_cap=cfg.event_cap)
    topo = build_dumbbell(engine, cfg.topology.dumbbell())
    rng = random.Random(cfg.seed)
    cc = BbrLite(mss=cfg.transport.mss, rng=random.Random(rng.getrandbits(64)))
    if "cc" in traces:
        cc.record_history()
    sender = Sender(engine, topo.send_forward, cc, mss=cfg.transport.mss,
                    buffer_capacity=cfg.transport.send_buffer,
                    rtt=cfg.transport.estimator())
    sender.wire_trace = traces.get("wire")
    receiver = Receiver(engine, topo.send_reverse)
    topo.to_receiver = receiver.receive
    topo.to_sender = sender.receive
    tracker = StreamTracker()
    sender.transmit_hooks.append(tracker.on_transmit)
    receiver.deliver_hooks.append(tracker.on_deliver)
    stack = Stack(engine, topo, sender, receiver, tracker, cc, rng)
    if scheme == "cats":
        sock = CatsSocket(engine, sender, cfg.fairness.build(),
                          default_priority=cfg.default_priority,
                          congestion=cfg.congestion_shed.build(),
                          schedule_trace=traces.get("schedule"))
        sock.feed_hooks.append(tracker.record)
        sock.intercept_hooks.append(tracker.expect)
        stack.socket = sock
    else:
        stack.socket = FifoSocket(engine, sender)
    sender.connect(int(cfg.transport.setup_rtts * cfg.topology.dumbbell().base_rtt))
    return stack


def attach_workload(stack: Stack, cfg: ExperimentConfig, spec: WorkloadSpec) -> None:
    stack.spec = spec
    stack.payloads = make_payloads(spec, stack.rng.getrandbits(64))
    if isinstance(stack.socket, CatsSocket):
        drive_cats(spec, stack.socket, stack.engine, stack.payloads)
        if cfg.save_data_threshold is not None:
            sock = stack.socket
            stack.engine.schedule(spec.submission_time,
                                  lambda: sock.save_data(cfg.save_data_threshold),
                                  "workload", "save-data")
    else:
        for start, end, label in stream_layout(spec):
            stack.tracker.expect(label, end - start)
            stack.tracker.record(start, [(label, end - start)])
        stack.feeder = drive_baseline(spec, stack.socket, stack.engine, stack.payloads,
                                      cfg.write_chunk)


def expected_stream(stack: Stack) -> bytes:
    """Bytes the receiver must end up with, in order."""
    if isinstance(stack.socket, FifoSocket):
        return stack.feeder.stream
    out = bytearray()
    used = dict.fromkeys(stack.payloads, 0)
    for start, end, label in stack.tracker.ranges:
        k = used[label]
        out += stack.payloads[label][k:k + end - start]
        used[label] = k + end - start
    return bytes(out)


def run_stack(stack: Stack) -> None:
    stack.engine.run()
    s = stack.sender
    if s.buffer.occupied or s.in_flight:
        raise SimulationError(
            f"event queue drained with {s.buffer.occupied} bytes unacknowledged")
    if isinstance(stack.socket, CatsSocket) and stack.socket.conductor.total_queued:
        raise SimulationError("event queue drained with data still in the conductor")


def make_report(stack: Stack, cfg: ExperimentConfig, scheme: str) -> RunReport:
    spec = stack.spec
    t = stack.tracker
    groups = []
    for g in spec.groups:
        done = t.completion(g.label)
        first = t.first_transmit.get(g.label)
        groups.append(GroupResult(
            label=g.label, priority=g.priority, bytes=g.size,
            submit_ms=ns_to_ms(spec.submission_time),
            first_transmit_ms=ns_to_ms(first),
            completion_ms=ns_to_ms(done),
            effective_throughput_bps=effective_throughput(g.size, spec.submission_time, done),
            transfer_throughput_bps=effective_throughput(g.size, first, done),
        ))
    topo = stack.topology
    network = {
        "probe_min_rtt_ms": ns_to_ms(probe_rtt(topo.config)),
        "bottleneck_drops": topo.bottleneck_fwd.dropped,
        "bottleneck_max_queue": topo.bottleneck_fwd.max_queue,
        "drops_total": sum(l.dropped for l in topo.links),
    }
    cc = stack.cc
    cc_info = {
        "final_phase": cc.phase.value,
        "btl_bw_bps": cc.btl_bw,
        "rt_prop_ms": ns_to_ms(cc.rt_prop),
        "filled_pipe": cc.filled_pipe,
        "rounds": cc.round_count,
    }
    conductor = {}
    if isinstance(stack.socket, CatsSocket):
        c = stack.socket.conductor
        conductor = {"intercepted": c.intercepted, "committed": c.committed, "shed": c.shed,
                     "deadlock_resolutions": c.deadlocks,
                     "congestion_sheds": stack.socket.congestion_sheds}
    transport = stack.sender.counters()
    transport["receiver_duplicates"] = stack.receiver.duplicate_segments
    transport["option_counts"] = stack.receiver.priority_counts
    transport["untagged_segments"] = stack.receiver.untagged_segments
    transport["events_dispatched"] = stack.engine.dispatched
    return RunReport(
        scheme=scheme,
        config_hash=cfg.config_hash(),
        groups=groups,
        setup_ms=ns_to_ms(int(cfg.transport.setup_rtts * topo.config.base_rtt)),
        transport=transport, network=network, conductor=conductor, cc=cc_info,
        assumptions=ASSUMPTIONS, config=cfg.to_dict(),
        cls_poor_threshold_ms=cfg.cls_poor_threshold_ms,
    )


def simulate(cfg: ExperimentConfig, scheme: Optional[str] = None,
             trace_dir: Union[str, Path, None] = None) -> tuple[RunReport, Stack]:
    """Run one scheme to quiescence. Traces named in ``cfg.trace`` go to ``trace_dir``."""
    cfg.validate()
    scheme = scheme or cfg.scheme
    with ExitStack() as files:
        traces = {}
        if cfg.trace and trace_dir is not None:
            d = Path(trace_dir)
            d.mkdir(parents=True, exist_ok=True)
            for name in cfg.trace:
                if name == "schedule" and scheme != "cats":
                    continue
                if name != "cc":
                    traces[name] = files.enter_context(open(d / f"{scheme}_{name}.log", "w"))
                else:
                    traces["cc"] = None
        stack = build_stack(cfg, scheme, traces)
        attach_workload(stack, cfg, cfg.workload_spec())
        run_stack(stack)
        if "cc" in traces and stack.cc.history is not None:
            write_cc_csv(stack.cc.history, Path(trace_dir) / f"{scheme}_cc.csv")
    return make_report(stack, cfg, scheme), stack


def write_cc_csv(history: list, path: Path) -> None:
    with open(path, "w") as f:
        f.write("time_ms,btl_bw_bps,rt_prop_ms,phase,pacing_rate_bps,cwnd_bytes\n")
        for now, bw, rt, phase, rate, cwnd in history:
            rt_s = "" if rt is None else f"{rt / 1e6:.6f}"
            f.write(f"{now / 1e6:.6f},{bw:.3f},{rt_s},{phase},{rate:.3f},{cwnd}\n")
