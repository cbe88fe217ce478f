"""Byte layouts for simulated segments and the priority TCP option.

A segment on the wire is a 20-byte network header, a 20-byte transport
header, options padded with NOPs to a 4-byte boundary, then payload. The
encoded length is exactly the size the link model serializes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

PRIORITY_OPTION_KIND = 254
PRIORITY_OPTION_LEN = 3
NUM_PRIORITIES = 5

OPT_EOL = 0
OPT_NOP = 1

FLAG_FIN = 0x01
FLAG_SYN = 0x02
FLAG_ACK = 0x10

NET_HEADER = struct.Struct("!BBHHHBBHII")
TRANSPORT_HEADER = struct.Struct("!HHIIBBHHH")
HEADER_OVERHEAD = NET_HEADER.size + TRANSPORT_HEADER.size  # 40

_PROTO = 6
_TTL = 64
_SRC_ADDR = 0x0A000001
_DST_ADDR = 0x0A000002
_WINDOW = 0xFFFF


class WireError(ValueError):
    pass


class NotThisOption(WireError):
    """Raised when the bytes at an option boundary are some other option."""


class MalformedOption(WireError):
    pass


class MalformedSegment(WireError):
    pass


def encode_priority_option(priority: int) -> bytes:
    if not isinstance(priority, int) or not 0 <= priority < NUM_PRIORITIES:
        raise WireError(f"priority must be in 0..{NUM_PRIORITIES - 1}, got {priority!r}")
    return bytes((PRIORITY_OPTION_KIND, PRIORITY_OPTION_LEN, priority))


def decode_priority_option(data: bytes) -> int:
    if len(data) < 1:
        raise MalformedOption("empty option")
    if data[0] != PRIORITY_OPTION_KIND:
        raise NotThisOption(f"option kind {data[0]} is not {PRIORITY_OPTION_KIND}")
    if len(data) < PRIORITY_OPTION_LEN:
        raise MalformedOption(f"truncated priority option ({len(data)} bytes)")
    if data[1] != PRIORITY_OPTION_LEN:
        raise MalformedOption(f"priority option length {data[1]} != {PRIORITY_OPTION_LEN}")
    if data[2] >= NUM_PRIORITIES:
        raise MalformedOption(f"priority {data[2]} out of range")
    return data[2]


def options_length(priority: Optional[int]) -> int:
    """Padded option bytes a segment carries (0 or 4)."""
    return 0 if priority is None else _pad4(PRIORITY_OPTION_LEN)


def _pad4(n: int) -> int:
    return (n + 3) & ~3


@dataclass(frozen=True)
class SegmentHeader:
    seq: int
    ack: int = 0
    flags: int = 0
    priority: Optional[int] = None
    src_port: int = 49152
    dst_port: int = 80

    @property
    def options(self) -> bytes:
        if self.priority is None:
            return b""
        raw = encode_priority_option(self.priority)
        return raw + bytes([OPT_NOP]) * (_pad4(len(raw)) - len(raw))

    @property
    def header_length(self) -> int:
        return HEADER_OVERHEAD + len(self.options)


@dataclass(frozen=True)
class Segment:
    header: SegmentHeader
    payload: bytes = b""

    @property
    def size_on_wire(self) -> int:
        return self.header.header_length + len(self.payload)

    @property
    def seq(self) -> int:
        return self.header.seq

    @property
    def end(self) -> int:
        return self.header.seq + len(self.payload)


def encode_segment(seg: Segment) -> bytes:
    h = seg.header
    opts = h.options
    total = HEADER_OVERHEAD + len(opts) + len(seg.payload)
    if total > 0xFFFF:
        raise WireError(f"segment of {total} bytes does not fit the length field")
    net = NET_HEADER.pack(0x45, 0, total, 0, 0, _TTL, _PROTO, 0, _SRC_ADDR, _DST_ADDR)
    data_offset = (TRANSPORT_HEADER.size + len(opts)) // 4
    tr = TRANSPORT_HEADER.pack(h.src_port, h.dst_port, h.seq & 0xFFFFFFFF,
                               h.ack & 0xFFFFFFFF, data_offset << 4, h.flags,
                               _WINDOW, 0, 0)
    return net + tr + opts + seg.payload


def parse_options(opts: bytes) -> Optional[int]:
    """Walk an option block and return the carried priority, if any."""
    priority = None
    i = 0
    while i < len(opts):
        kind = opts[i]
        if kind == OPT_EOL:
            break
        if kind == OPT_NOP:
            i += 1
            continue
        if i + 1 >= len(opts):
            raise MalformedOption("option truncated before length byte")
        length = opts[i + 1]
        if length < 2 or i + length > len(opts):
            raise MalformedOption(f"bad option length {length}")
        if kind == PRIORITY_OPTION_KIND:
            priority = decode_priority_option(opts[i:i + length])
        i += length
    return priority


def decode_segment(data: bytes) -> Segment:
    if len(data) < HEADER_OVERHEAD:
        raise MalformedSegment(f"{len(data)} bytes is shorter than the fixed headers")
    ver_ihl, _, total, *_ = NET_HEADER.unpack_from(data, 0)
    if ver_ihl != 0x45 or total != len(data):
        raise MalformedSegment("network header inconsistent with buffer")
    sport, dport, seq, ack, off, flags, _, _, _ = TRANSPORT_HEADER.unpack_from(data, NET_HEADER.size)
    hdr_len = (off >> 4) * 4
    if hdr_len < TRANSPORT_HEADER.size or NET_HEADER.size + hdr_len > len(data):
        raise MalformedSegment(f"bad data offset {off >> 4}")
    opt_start = HEADER_OVERHEAD
    opt_end = NET_HEADER.size + hdr_len
    priority = parse_options(data[opt_start:opt_end])
    header = SegmentHeader(seq=seq, ack=ack, flags=flags, priority=priority,
                           src_port=sport, dst_port=dport)
    return Segment(header, bytes(data[opt_end:]))


def hexdump(data: bytes, width: int = 16) -> str:
    lines = []
    for off in range(0, len(data), width):
        chunk = data[off:off + width]
        lines.append(f"{off:04x}  {chunk.hex(' ')}")
    return "\n".join(lines)
