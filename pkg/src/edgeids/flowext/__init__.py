"""Packet capture parsing, unidirectional flow aggregation and flow features."""

from .features import FORMULAS, FeatureSchema, SchemaError, extract_features, write_feature_csv
from .flows import (
    FlowKey,
    FlowRecord,
    FlowSource,
    FlowTable,
    PcapReplay,
    aggregate,
    flow_key,
    update_flow,
)
from .pcap import PacketEvent, ParsedCapture, PcapFormatError, iter_pcap, parse_pcap, read_pcap

__all__ = [
    "FORMULAS",
    "FeatureSchema",
    "FlowKey",
    "FlowRecord",
    "FlowSource",
    "FlowTable",
    "PacketEvent",
    "ParsedCapture",
    "PcapFormatError",
    "PcapReplay",
    "SchemaError",
    "aggregate",
    "extract_features",
    "flow_key",
    "iter_pcap",
    "parse_pcap",
    "read_pcap",
    "update_flow",
    "write_feature_csv",
]
