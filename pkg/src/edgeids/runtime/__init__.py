"""Model files, batch-1 latency/energy benchmarking and streaming classification."""

from .artifact import (
    ArtifactError,
    BadMagicError,
    ChecksumError,
    ModelArtifact,
    ShapeError,
    TruncatedError,
    VersionError,
    load_model,
    profile_model,
    read_artifact,
    save_model,
)
from .bench import BenchResult, LatencyStats, benchmark_latency, energy_report
from .stream import SchemaMismatchError, check_schema, classify_stream, write_ndjson

__all__ = [
    "ArtifactError",
    "BadMagicError",
    "BenchResult",
    "ChecksumError",
    "LatencyStats",
    "ModelArtifact",
    "SchemaMismatchError",
    "ShapeError",
    "TruncatedError",
    "VersionError",
    "benchmark_latency",
    "check_schema",
    "classify_stream",
    "energy_report",
    "load_model",
    "profile_model",
    "read_artifact",
    "save_model",
    "write_ndjson",
]
