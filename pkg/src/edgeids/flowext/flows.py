"""Unidirectional 5-tuple flow aggregation with streaming moments."""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Protocol

from .pcap import (
    PROTO_ICMP,
    PROTO_TCP,
    TCP_ACK,
    TCP_FIN,
    TCP_PSH,
    TCP_RST,
    TCP_SYN,
    CaptureStats,
    PacketEvent,
    iter_pcap,
)

DEFAULT_IDLE_TIMEOUT_S = 60.0


class FlowKey(NamedTuple):
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    protocol: int


def flow_key(p: PacketEvent) -> FlowKey:
    if p.protocol == PROTO_ICMP:
        return FlowKey(p.src_ip, p.dst_ip, 0, 0, p.protocol)
    return FlowKey(p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol)


@dataclass
class FlowRecord:
    """Running counters for one directed flow. Times are integer microseconds,
    so every sum (and sum of squares) here is exact."""

    key: FlowKey
    first: int
    last: int
    packet_count: int = 0
    byte_count: int = 0
    syn: int = 0
    ack: int = 0
    fin: int = 0
    rst: int = 0
    psh: int = 0
    flags_or: int = 0
    len_min: int = 0
    len_max: int = 0
    len_sum: int = 0
    len_sumsq: int = 0
    iat_sum: int = 0
    iat_sumsq: int = 0
    iat_count: int = 0
    win_min: int = 0
    win_max: int = 0
    win_sum: int = 0
    tcp_packets: int = 0
    icmp_type: int = 0
    icmp_seq: int = 0
    sealed: bool = False

    @classmethod
    def start(cls, p: PacketEvent, ts: int) -> "FlowRecord":
        r = cls(flow_key(p), ts, ts, len_min=p.total_len, len_max=p.total_len)
        r.add(p, ts, first=True)
        return r

    def add(self, p: PacketEvent, ts: int, first: bool = False) -> None:
        if not first:
            gap = ts - self.last
            self.iat_sum += gap
            self.iat_sumsq += gap * gap
            self.iat_count += 1
            self.last = ts
        self.packet_count += 1
        n = p.total_len
        self.byte_count += n
        self.len_sum += n
        self.len_sumsq += n * n
        self.len_min = min(self.len_min, n)
        self.len_max = max(self.len_max, n)
        if p.protocol == PROTO_TCP:
            f = p.tcp_flags
            self.flags_or |= f
            self.syn += bool(f & TCP_SYN)
            self.ack += bool(f & TCP_ACK)
            self.fin += bool(f & TCP_FIN)
            self.rst += bool(f & TCP_RST)
            self.psh += bool(f & TCP_PSH)
            w = p.tcp_window
            if self.tcp_packets == 0:
                self.win_min = self.win_max = w
            else:
                self.win_min = min(self.win_min, w)
                self.win_max = max(self.win_max, w)
            self.win_sum += w
            self.tcp_packets += 1
        elif p.protocol == PROTO_ICMP:
            self.icmp_type = p.icmp_type
            self.icmp_seq = p.icmp_seq


@dataclass
class FlowTable:
    """Single-writer flow table. Flows idle longer than the timeout are sealed.

    Flows are kept in least-recently-active order so expiry only inspects
    the front of the table.
    """

    idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S
    flows: "OrderedDict[FlowKey, FlowRecord]" = field(default_factory=OrderedDict)
    clock: int | None = None
    packets_seen: int = 0

    @property
    def idle_timeout_us(self) -> int:
        return int(round(self.idle_timeout_s * 1_000_000))

    def expire(self, now: int) -> list[FlowRecord]:
        sealed = []
        limit = self.idle_timeout_us
        while self.flows:
            key, rec = next(iter(self.flows.items()))
            if now - rec.last <= limit:
                break
            del self.flows[key]
            rec.sealed = True
            sealed.append(rec)
        return sealed

    def flush(self) -> list[FlowRecord]:
        sealed = list(self.flows.values())
        for r in sealed:
            r.sealed = True
        self.flows.clear()
        return sealed

    def snapshot(self, key: FlowKey) -> FlowRecord | None:
        rec = self.flows.get(key)
        return None if rec is None else FlowRecord(**{**rec.__dict__})


def update_flow(table: FlowTable, p: PacketEvent) -> list[FlowRecord]:
    """Add one packet; returns flows sealed by idle expiry at this packet's time.

    Out-of-order packets are clamped to the latest timestamp seen.
    """
    ts = p.timestamp if table.clock is None else max(p.timestamp, table.clock)
    table.clock = ts
    sealed = table.expire(ts)
    key = flow_key(p)
    rec = table.flows.get(key)
    if rec is None:
        table.flows[key] = FlowRecord.start(p, ts)
    else:
        rec.add(p, ts)
        table.flows.move_to_end(key)
    table.packets_seen += 1
    return sealed


def aggregate(events: Iterable[PacketEvent], idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S
              ) -> Iterator[FlowRecord]:
    """Every flow from ``events``, sealed ones as they expire and the rest at the end."""
    table = FlowTable(idle_timeout_s)
    for p in events:
        yield from update_flow(table, p)
    yield from table.flush()


class PacketSource(Protocol):
    """Anything that yields packet events: a pcap replay, or a live-capture adapter."""

    def __iter__(self) -> Iterator[PacketEvent]:
        ...


class PcapReplay:
    """Replays a pcap file; with ``pacing`` the original inter-packet gaps are slept
    (divided by ``speed``)."""

    def __init__(self, path, pacing: bool = False, speed: float = 1.0):
        self.path = path
        self.pacing = pacing
        self.speed = speed
        self.stats = CaptureStats()

    def __iter__(self) -> Iterator[PacketEvent]:
        self.stats = CaptureStats()
        prev = None
        with open(self.path, "rb") as fh:
            for ev in iter_pcap(fh, self.stats):
                if self.pacing and prev is not None and ev.timestamp > prev:
                    time.sleep((ev.timestamp - prev) / 1e6 / self.speed)
                prev = ev.timestamp
                yield ev


class FlowSource:
    """Sealed flow records from a packet source, plus the schema they will be read with."""

    def __init__(self, packets: PacketSource, schema, idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S):
        self.packets = packets
        self.schema = schema
        self.idle_timeout_s = idle_timeout_s

    def __iter__(self) -> Iterator[FlowRecord]:
        return aggregate(self.packets, self.idle_timeout_s)
