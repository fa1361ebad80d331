"""Classic libpcap reader for Ethernet/IPv4 TCP, UDP and ICMP packets."""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator, NamedTuple

MAGIC_USEC = 0xA1B2C3D4
MAGIC_NSEC = 0xA1B23C4D
LINKTYPE_ETHERNET = 1
ETH_IPV4 = 0x0800
ETH_VLAN = 0x8100
PROTO_ICMP, PROTO_TCP, PROTO_UDP = 1, 6, 17

TCP_FIN, TCP_SYN, TCP_RST, TCP_PSH, TCP_ACK = 0x01, 0x02, 0x04, 0x08, 0x10


class PcapFormatError(ValueError):
    pass


class PacketEvent(NamedTuple):
    timestamp: int  # microseconds since the epoch
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    protocol: int
    total_len: int  # IPv4 total length
    header_len: int  # IPv4 + transport header bytes
    tcp_flags: int = 0
    tcp_window: int = 0
    icmp_type: int = 0
    icmp_seq: int = 0  # as carried on the wire (big-endian)


@dataclass
class CaptureStats:
    parsed: int = 0
    skipped: int = 0
    truncated: int = 0


@dataclass
class ParsedCapture:
    events: list[PacketEvent] = field(default_factory=list)
    stats: CaptureStats = field(default_factory=CaptureStats)


class _Truncated(Exception):
    pass


def _decode(frame: bytes, ts: int) -> PacketEvent | None:
    """Decode one Ethernet frame; ``None`` for non-IPv4/TCP/UDP/ICMP traffic."""
    if len(frame) < 14:
        raise _Truncated
    off = 12
    ethertype = struct.unpack_from("!H", frame, off)[0]
    if ethertype == ETH_VLAN:
        if len(frame) < 18:
            raise _Truncated
        off += 4
        ethertype = struct.unpack_from("!H", frame, off)[0]
    if ethertype != ETH_IPV4:
        return None
    ip = off + 2
    if len(frame) < ip + 20:
        raise _Truncated
    ver_ihl, _, total_len, _, frag, _, proto = struct.unpack_from("!BBHHHBB", frame, ip)
    if ver_ihl >> 4 != 4:
        return None
    ihl = (ver_ihl & 0x0F) * 4
    if ihl < 20 or len(frame) < ip + ihl:
        raise _Truncated
    if frag & 0x1FFF:
        return None  # non-first fragment carries no transport header
    src = socket.inet_ntoa(frame[ip + 12 : ip + 16])
    dst = socket.inet_ntoa(frame[ip + 16 : ip + 20])
    l4 = ip + ihl
    if proto == PROTO_TCP:
        if len(frame) < l4 + 20:
            raise _Truncated
        sport, dport, _, _, doff, flags, window = struct.unpack_from("!HHIIBBH", frame, l4)
        thl = (doff >> 4) * 4
        return PacketEvent(ts, src, dst, sport, dport, proto, total_len, ihl + thl,
                           tcp_flags=flags, tcp_window=window)
    if proto == PROTO_UDP:
        if len(frame) < l4 + 8:
            raise _Truncated
        sport, dport = struct.unpack_from("!HH", frame, l4)
        return PacketEvent(ts, src, dst, sport, dport, proto, total_len, ihl + 8)
    if proto == PROTO_ICMP:
        if len(frame) < l4 + 8:
            raise _Truncated
        icmp_type, _, _, _, seq = struct.unpack_from("!BBHHH", frame, l4)
        return PacketEvent(ts, src, dst, 0, 0, proto, total_len, ihl + 8,
                           icmp_type=icmp_type, icmp_seq=seq)
    return None


def iter_pcap(stream: BinaryIO, stats: CaptureStats | None = None) -> Iterator[PacketEvent]:
    """Yield packet events from a classic pcap stream (either byte order)."""
    stats = stats if stats is not None else CaptureStats()
    head = stream.read(24)
    if len(head) < 24:
        raise PcapFormatError("file shorter than a pcap global header")
    magic_le = struct.unpack("<I", head[:4])[0]
    magic_be = struct.unpack(">I", head[:4])[0]
    if magic_le in (MAGIC_USEC, MAGIC_NSEC):
        endian, magic = "<", magic_le
    elif magic_be in (MAGIC_USEC, MAGIC_NSEC):
        endian, magic = ">", magic_be
    else:
        raise PcapFormatError(f"bad pcap magic 0x{magic_le:08x}")
    linktype = struct.unpack(endian + "I", head[20:24])[0]
    if linktype != LINKTYPE_ETHERNET:
        raise PcapFormatError(f"unsupported link type {linktype}; only Ethernet is handled")
    nsec = magic == MAGIC_NSEC
    rec = struct.Struct(endian + "IIII")
    while True:
        rh = stream.read(16)
        if not rh:
            return
        if len(rh) < 16:
            stats.truncated += 1
            return
        sec, frac, incl, _ = rec.unpack(rh)
        frame = stream.read(incl)
        if len(frame) < incl:
            stats.truncated += 1
            return
        ts = sec * 1_000_000 + (frac // 1000 if nsec else frac)
        try:
            ev = _decode(frame, ts)
        except _Truncated:
            stats.truncated += 1
            continue
        if ev is None:
            stats.skipped += 1
            continue
        stats.parsed += 1
        yield ev


def parse_pcap(stream: BinaryIO) -> ParsedCapture:
    out = ParsedCapture()
    out.events = list(iter_pcap(stream, out.stats))
    return out


def read_pcap(path) -> ParsedCapture:
    with open(path, "rb") as fh:
        return parse_pcap(fh)


# --- writing (fixtures and replay tooling) -------------------------------------------


def _checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\0"
    s = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while s >> 16:
        s = (s & 0xFFFF) + (s >> 16)
    return ~s & 0xFFFF


def build_frame(ev: PacketEvent, payload: bytes = b"", src_mac: bytes = b"\x02" * 6,
                dst_mac: bytes = b"\x04" * 6) -> bytes:
    """Ethernet/IPv4 frame carrying ``ev``; ``ev.total_len`` is recomputed from the payload."""
    if ev.protocol == PROTO_TCP:
        l4 = struct.pack("!HHIIBBHHH", ev.src_port, ev.dst_port, 0, 0, 5 << 4, ev.tcp_flags,
                         ev.tcp_window, 0, 0)
    elif ev.protocol == PROTO_UDP:
        l4 = struct.pack("!HHHH", ev.src_port, ev.dst_port, 8 + len(payload), 0)
    elif ev.protocol == PROTO_ICMP:
        l4 = struct.pack("!BBHHH", ev.icmp_type, 0, 0, 0x1234, ev.icmp_seq)
    else:
        raise ValueError(f"cannot build protocol {ev.protocol}")
    total = 20 + len(l4) + len(payload)
    hdr = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total, 0, 0, 64, ev.protocol, 0,
                      socket.inet_aton(ev.src_ip), socket.inet_aton(ev.dst_ip))
    hdr = hdr[:10] + struct.pack("!H", _checksum(hdr)) + hdr[12:]
    return dst_mac + src_mac + struct.pack("!H", ETH_IPV4) + hdr + l4 + payload


def write_pcap(stream: BinaryIO, frames, big_endian: bool = False) -> None:
    """Write ``(timestamp_us, frame_bytes)`` pairs as a classic microsecond pcap."""
    e = ">" if big_endian else "<"
    stream.write(struct.pack(e + "IHHiIII", MAGIC_USEC, 2, 4, 0, 0, 65535, LINKTYPE_ETHERNET))
    for ts, frame in frames:
        stream.write(struct.pack(e + "IIII", ts // 1_000_000, ts % 1_000_000, len(frame), len(frame)))
        stream.write(frame)
