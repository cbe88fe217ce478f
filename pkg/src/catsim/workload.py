"""Webpage-style workloads and the two application drivers."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .conductor import check_priority
from .engine import Engine, ms
from .sockets import CatsSocket, FifoSocket

KB = 1024
DEFAULT_WRITE_CHUNK = 64 * KB


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class Group:
    priority: int
    size: int  # bytes
    label: str

    def __post_init__(self):
        check_priority(self.priority)
        if self.size <= 0:
            raise WorkloadError(f"group {self.label!r} has non-positive size {self.size}")


@dataclass(frozen=True)
class WorkloadSpec:
    groups: tuple[Group, ...]
    submission_order: tuple[int, ...]
    submission_time: int = 0  # ns

    def __post_init__(self):
        if sorted(self.submission_order) != list(range(len(self.groups))):
            raise WorkloadError(
                f"submission_order {list(self.submission_order)} is not a permutation "
                f"of 0..{len(self.groups) - 1}")
        labels = [g.label for g in self.groups]
        if len(set(labels)) != len(labels):
            raise WorkloadError("group labels must be unique")

    @property
    def total_bytes(self) -> int:
        return sum(g.size for g in self.groups)

    def ordered(self) -> list[Group]:
        return [self.groups[i] for i in self.submission_order]

    def to_dict(self) -> dict:
        return {
            "groups": [{"priority": g.priority, "size": g.size, "label": g.label}
                       for g in self.groups],
            "submission_order": list(self.submission_order),
            "submission_time_ms": self.submission_time / 1e6,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkloadSpec":
        unknown = set(d) - {"groups", "submission_order", "submission_time_ms"}
        if unknown:
            raise WorkloadError(f"unknown workload key(s): {sorted(unknown)}")
        try:
            groups = []
            for g in d["groups"]:
                extra = set(g) - {"priority", "size", "label"}
                if extra:
                    raise WorkloadError(f"unknown group key(s): {sorted(extra)}")
                groups.append(Group(int(g["priority"]), int(g["size"]), str(g["label"])))
        except KeyError as e:
            raise WorkloadError(f"workload group missing key {e}") from None
        order = d.get("submission_order", list(range(len(groups))))
        return cls(tuple(groups), tuple(int(i) for i in order),
                   ms(float(d.get("submission_time_ms", 0.0))))


def default_webpage() -> WorkloadSpec:
    """Five resource groups, submitted least urgent first."""
    groups = (
        Group(0, 8 * KB, "P0 critical HTML/CSS"),
        Group(1, 25 * KB, "P1 CSS framework"),
        Group(2, 40 * KB, "P2 application JS"),
        Group(3, 60 * KB, "P3 images/media"),
        Group(4, 150 * KB, "P4 analytics/tracking"),
    )
    return WorkloadSpec(groups, submission_order=(4, 3, 2, 1, 0), submission_time=0)


def load_workload(path: Union[str, Path]) -> WorkloadSpec:
    with open(path) as f:
        return WorkloadSpec.from_dict(json.load(f))


def make_payloads(spec: WorkloadSpec, seed: int) -> dict[str, bytes]:
    """Deterministic pseudo-random content for every group."""
    rng = random.Random(seed)
    return {g.label: rng.randbytes(g.size) for g in spec.groups}


@dataclass
class BaselineFeeder:
    """Chunked sender: keeps topping up the socket buffer in FIFO order."""

    socket: FifoSocket
    stream: bytes
    write_chunk: int = DEFAULT_WRITE_CHUNK
    offset: int = 0
    writes: list[tuple[int, int]] = field(default_factory=list)  # (ns, bytes accepted)

    def start(self) -> None:
        self.socket.on_buffer_space(self.refill)
        self.refill()

    def refill(self) -> None:
        while self.offset < len(self.stream):
            piece = self.stream[self.offset:self.offset + self.write_chunk]
            n = self.socket.write(piece)
            if n == 0:
                return
            self.writes.append((self.socket.engine.now, n))
            self.offset += n

    @property
    def done(self) -> bool:
        return self.offset >= len(self.stream)


def drive_cats(spec: WorkloadSpec, socket: CatsSocket, engine: Engine,
               payloads: dict[str, bytes]) -> None:
    """Hand every group to the socket in one call each, all at submission time."""
    def submit():
        for g in spec.ordered():
            socket.send(payloads[g.label], g.priority, tag=g.label)
    engine.schedule(spec.submission_time, submit, "workload", "submit-all")


def drive_baseline(spec: WorkloadSpec, socket: FifoSocket, engine: Engine,
                   payloads: dict[str, bytes],
                   write_chunk: int = DEFAULT_WRITE_CHUNK) -> BaselineFeeder:
    """Concatenate groups in submission order and feed them through a chunked writer."""
    stream = b"".join(payloads[g.label] for g in spec.ordered())
    feeder = BaselineFeeder(socket, stream, write_chunk)
    engine.schedule(spec.submission_time, feeder.start, "workload", "feeder-start")
    return feeder


def stream_layout(spec: WorkloadSpec) -> list[tuple[int, int, str]]:
    """(start, end, label) of each group in the baseline's concatenated stream."""
    out, off = [], 0
    for g in spec.ordered():
        out.append((off, off + g.size, g.label))
        off += g.size
    return out
