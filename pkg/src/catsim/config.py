"""Experiment configuration: dataclasses with strict dict/JSON loading."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .conductor import FairnessConfig, check_priority
from .engine import DEFAULT_EVENT_CAP, ms
from .net import ConfigError, DumbbellConfig
from .rto import RttEstimator
from .sockets import CongestionShedConfig
from .workload import WorkloadSpec, default_webpage, DEFAULT_WRITE_CHUNK

SCHEMES = ("cats", "baseline")
TRACES = ("events", "schedule", "cc", "wire")


@dataclass
class TopologyConfig:
    bottleneck_rate_bps: int = 2_000_000
    rtt_ms: float = 50.0
    access_rate_bps: int = 100_000_000
    access_delay_ms: float = 1.0
    queue_capacity: int = 100

    def dumbbell(self) -> DumbbellConfig:
        return DumbbellConfig.from_rtt(self.bottleneck_rate_bps, ms(self.rtt_ms),
                                       self.access_rate_bps, ms(self.access_delay_ms),
                                       self.queue_capacity)


@dataclass
class TransportConfig:
    mss: int = 1448
    send_buffer: int = 64 * 1024
    min_rto_ms: float = 200.0
    max_rto_ms: float = 60_000.0
    clock_granularity_ms: float = 1.0
    setup_rtts: float = 1.0  # handshake cost, in configured RTTs

    def estimator(self) -> RttEstimator:
        return RttEstimator(min_rto=ms(self.min_rto_ms), max_rto=ms(self.max_rto_ms),
                            granularity=ms(self.clock_granularity_ms))


@dataclass
class FairnessParams:
    high: list = field(default_factory=lambda: [None, 262144, 131072, 65536, 32768])
    low: Optional[list] = None
    payback: list = field(default_factory=lambda: [1, 1, 2, 4, 8])

    def build(self) -> FairnessConfig:
        return FairnessConfig.build(self.high, self.low, self.payback)


@dataclass
class CongestionParams:
    enabled: bool = False
    rtt_factor: float = 4.0
    rounds: int = 3
    shed_bytes: int = 64 * 1024

    def build(self) -> CongestionShedConfig:
        return CongestionShedConfig(self.enabled, self.rtt_factor, self.rounds, self.shed_bytes)


@dataclass
class ExperimentConfig:
    scheme: str = "cats"
    seed: int = 1
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    transport: TransportConfig = field(default_factory=TransportConfig)
    fairness: FairnessParams = field(default_factory=FairnessParams)
    congestion_shed: CongestionParams = field(default_factory=CongestionParams)
    workload: Union[str, dict] = "default_webpage"
    write_chunk: int = DEFAULT_WRITE_CHUNK
    default_priority: Optional[int] = None
    save_data_threshold: Optional[int] = None
    cls_poor_threshold_ms: float = 400.0
    event_cap: int = DEFAULT_EVENT_CAP
    out: str = "results"
    trace: list = field(default_factory=list)

    # fields that do not change what is simulated
    _NOT_HASHED = ("scheme", "out", "trace", "event_cap")

    def validate(self) -> "ExperimentConfig":
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme: expected one of {SCHEMES}, got {self.scheme!r}")
        for t in self.trace:
            if t not in TRACES:
                raise ConfigError(f"trace: unknown trace {t!r}, expected any of {TRACES}")
        self.topology.dumbbell()
        self.transport.estimator()
        if self.transport.mss <= 0 or self.transport.send_buffer < self.transport.mss:
            raise ConfigError("transport: need 0 < mss <= send_buffer")
        if self.transport.setup_rtts < 0:
            raise ConfigError("transport.setup_rtts: must be non-negative")
        try:
            self.fairness.build()
            self.workload_spec()
            if self.default_priority is not None:
                check_priority(self.default_priority)
            if self.save_data_threshold is not None:
                check_priority(self.save_data_threshold)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.write_chunk <= 0:
            raise ConfigError("write_chunk: must be positive")
        if self.congestion_shed.rtt_factor <= 0 or self.congestion_shed.rounds <= 0:
            raise ConfigError("congestion_shed: rtt_factor and rounds must be positive")
        return self

    def workload_spec(self) -> WorkloadSpec:
        if self.workload == "default_webpage":
            return default_webpage()
        if isinstance(self.workload, dict):
            return WorkloadSpec.from_dict(self.workload)
        raise ConfigError(f"workload: expected 'default_webpage' or a table, got {self.workload!r}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if isinstance(self.workload, str):
            d["workload"] = self.workload
        return d

    def config_hash(self) -> str:
        d = self.to_dict()
        for k in self._NOT_HASHED:
            d.pop(k, None)
        d["workload"] = self.workload_spec().to_dict()
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_SECTIONS = {
    "topology": TopologyConfig,
    "transport": TransportConfig,
    "fairness": FairnessParams,
    "congestion_shed": CongestionParams,
}


def _strict(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a table, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown config key '{where}{key}'")
    return cls(**data)


def config_from_dict(data: dict[str, Any], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Overlay ``data`` on ``base`` (defaults if omitted); unknown keys are errors."""
    cfg = dataclasses.replace(base) if base is not None else ExperimentConfig()
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, value in data.items():
        if key not in top:
            raise ConfigError(f"unknown config key '{key}'")
        if key in _SECTIONS:
            merged = dataclasses.asdict(getattr(cfg, key))
            _strict(_SECTIONS[key], value, f"{key}.")
            merged.update(value)
            value = _SECTIONS[key](**merged)
        setattr(cfg, key, value)
    return cfg


def load_config(path: Union[str, Path], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from None
    return config_from_dict(data, base)


def paper_preset() -> ExperimentConfig:
    """The dumbbell experiment: 2 Mbps bottleneck, 50 ms RTT, five-group page."""
    return ExperimentConfig()
