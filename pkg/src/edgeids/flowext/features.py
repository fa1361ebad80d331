"""Schema-driven feature vectors from flow records.

Default schema definitions (all header-derived, no payload):

* durations and inter-arrival times are in seconds;
* lengths are IPv4 total lengths in bytes;
* standard deviations are population deviations;
* TCP and ICMP fields are 0 on flows of other protocols;
* ``icmp.seq_le`` is the last ICMP sequence number read little-endian,
  i.e. the wire value with its two bytes swapped.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .flows import FlowRecord


class SchemaError(ValueError):
    pass


def _mean(total, count):
    return total / count if count else 0.0


def _std(total, sumsq, count):
    if not count:
        return 0.0
    m = total / count
    return math.sqrt(max(0.0, sumsq / count - m * m))


def _duration(r: FlowRecord) -> float:
    return (r.last - r.first) / 1e6


FORMULAS: dict[str, Callable[[FlowRecord], float]] = {
    "flow.duration": _duration,
    "flow.pkt_count": lambda r: float(r.packet_count),
    "flow.byte_count": lambda r: float(r.byte_count),
    "flow.pkts_per_s": lambda r: r.packet_count / _duration(r) if r.last > r.first else 0.0,
    "len.min": lambda r: float(r.len_min),
    "len.max": lambda r: float(r.len_max),
    "len.mean": lambda r: _mean(r.len_sum, r.packet_count),
    "len.std": lambda r: _std(r.len_sum, r.len_sumsq, r.packet_count),
    "iat.mean": lambda r: _mean(r.iat_sum, r.iat_count) / 1e6,
    "iat.std": lambda r: _std(r.iat_sum, r.iat_sumsq, r.iat_count) / 1e6,
    "tcp.syn_count": lambda r: float(r.syn),
    "tcp.ack_count": lambda r: float(r.ack),
    "tcp.fin_count": lambda r: float(r.fin),
    "tcp.rst_count": lambda r: float(r.rst),
    "tcp.psh_count": lambda r: float(r.psh),
    "tcp.flags": lambda r: float(r.flags_or),
    "tcp.win_min": lambda r: float(r.win_min),
    "tcp.win_max": lambda r: float(r.win_max),
    "tcp.win_mean": lambda r: _mean(r.win_sum, r.tcp_packets),
    "port.src": lambda r: float(r.key.src_port),
    "port.dst": lambda r: float(r.key.dst_port),
    "ip.proto": lambda r: float(r.key.protocol),
    "icmp.type": lambda r: float(r.icmp_type),
    "icmp.seq_le": lambda r: float(((r.icmp_seq & 0xFF) << 8) | (r.icmp_seq >> 8)),
}


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered ``(name, formula_id)`` pairs."""

    entries: tuple[tuple[str, str], ...]

    def __post_init__(self):
        entries = tuple((str(n), str(f)) for n, f in self.entries)
        names = [n for n, _ in entries]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        unknown = [f for _, f in entries if f not in FORMULAS]
        if unknown:
            raise SchemaError(f"unknown feature formulas: {unknown}")
        object.__setattr__(self, "entries", entries)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.entries)

    def __len__(self):
        return len(self.entries)

    @classmethod
    def default(cls) -> "FeatureSchema":
        return cls(tuple((name, name) for name in FORMULAS))

    @classmethod
    def from_list(cls, items: Sequence) -> "FeatureSchema":
        """Accepts formula ids, ``[name, formula]`` pairs or ``{"name", "formula"}`` dicts."""
        entries = []
        for item in items:
            if isinstance(item, str):
                entries.append((item, item))
            elif isinstance(item, dict):
                entries.append((item["name"], item.get("formula", item["name"])))
            else:
                entries.append(tuple(item))
        return cls(tuple(entries))

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        return cls.from_list(json.loads(Path(path).read_text()))

    def to_list(self) -> list[dict]:
        return [{"name": n, "formula": f} for n, f in self.entries]


def extract_features(r: FlowRecord, schema: FeatureSchema | None = None) -> np.ndarray:
    schema = schema or FeatureSchema.default()
    return np.array([FORMULAS[f](r) for _, f in schema.entries], dtype=np.float64)


def write_feature_csv(path, records: Iterable[FlowRecord], schema: FeatureSchema | None = None,
                      label: str = "unknown", label_column: str = "label") -> int:
    """One row per flow, header = schema names + label column; returns the row count."""
    schema = schema or FeatureSchema.default()
    n = 0
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*schema.names, label_column])
        for r in records:
            w.writerow([*(repr(float(v)) for v in extract_features(r, schema)), label])
            n += 1
    return n
