"""Batch-1 latency timing and meter-based energy arithmetic."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

MIN_RUNS = 30
WARMUP_RUNS = 5


@dataclass(frozen=True)
class LatencyStats:
    mean: float
    p50: float
    p95: float
    runs: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "p50": self.p50, "p95": self.p95}


@dataclass(frozen=True)
class BenchResult:
    """Energy per prediction from a supplied current reading (above idle) and voltage."""

    latency_ms: float
    current_mA: float
    voltage_V: float
    power_mW: float
    energy_mJ: float
    runs: int = 0
    latency: LatencyStats | None = None

    def to_dict(self) -> dict:
        lat = self.latency.to_dict() if self.latency else {"mean": self.latency_ms}
        return {
            "latency_ms": lat,
            "current_mA": self.current_mA,
            "voltage_V": self.voltage_V,
            "power_mW": self.power_mW,
            "energy_mJ": self.energy_mJ,
            "runs": self.runs,
        }


def benchmark_latency(predict: Callable, inputs, runs: int = 100, warmup: int = WARMUP_RUNS
                      ) -> LatencyStats:
    """Time ``predict`` on one row at a time, cycling through ``inputs``."""
    if runs < MIN_RUNS:
        raise ValueError(f"runs must be at least {MIN_RUNS}, got {runs}")
    X = np.asarray(inputs)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[0] == 0:
        raise ValueError("need at least one input row")
    rows = [X[i : i + 1] for i in range(X.shape[0])]
    for i in range(warmup):
        predict(rows[i % len(rows)])
    times = np.empty(runs)
    clock = time.perf_counter
    for i in range(runs):
        x = rows[i % len(rows)]
        t0 = clock()
        predict(x)
        times[i] = clock() - t0
    ms = times * 1e3
    return LatencyStats(float(ms.mean()), float(np.percentile(ms, 50)),
                        float(np.percentile(ms, 95)), runs)


def energy_report(latency_ms: float, current_mA: float, voltage_V: float = 5.0,
                  latency: LatencyStats | None = None) -> BenchResult:
    """power = I x V (mW), energy = power x latency / 1000 (mJ)."""
    if min(latency_ms, current_mA, voltage_V) < 0:
        raise ValueError("latency, current and voltage must be non-negative")
    power = current_mA * voltage_V
    energy = power * latency_ms / 1000.0
    return BenchResult(float(latency_ms), float(current_mA), float(voltage_V), power, energy,
                       runs=latency.runs if latency else 0, latency=latency)
