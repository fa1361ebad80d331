from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..hwcost import HardwareBudget, HardwareProfile

EVALUATED = "evaluated"
REJECTED = "rejected_hardware"


class NoFeasibleCandidate(RuntimeError):
    """No candidate satisfied the hardware budget."""

    def __init__(self, message: str, best_infeasible: "CandidateResult | None" = None):
        super().__init__(message)
        self.best_infeasible = best_infeasible


@dataclass
class CandidateResult:
    descriptor: dict
    profile: HardwareProfile
    status: str
    val_accuracy: float | None = None
    index: int = 0
    generation: int | None = None
    wall_time: float = 0.0
    model: Any = field(default=None, repr=False, compare=False)

    def rank_key(self):
        """Sort key: accuracy descending, then compute, flash, position ascending."""
        return (-(self.val_accuracy or 0.0), self.profile.compute, self.profile.flash,
                self.generation or 0, self.index)

    def to_record(self) -> dict:
        rec = {
            "index": self.index,
            "descriptor": self.descriptor,
            "profile": self.profile.to_dict(),
            "status": self.status,
            "val_accuracy": self.val_accuracy,
            "wall_time_s": round(self.wall_time, 6),
        }
        if self.generation is not None:
            rec["generation"] = self.generation
        return rec


def overshoot(p: HardwareProfile, b: HardwareBudget) -> float:
    """Largest relative budget excess; used to pick the least-infeasible candidate."""
    worst = 0.0
    for used, cap in ((p.flash, b.flash_max), (p.ram, b.ram_max), (p.compute, b.compute_max)):
        if used > cap:
            worst = max(worst, float("inf") if cap == 0 else (used - cap) / cap)
    return worst


class EventLog:
    """Newline-delimited JSON, one record per candidate."""

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def write(self, record: dict) -> None:
        if self.path is None:
            return
        line = json.dumps(record, sort_keys=True)
        with self._lock, self.path.open("a") as fh:
            fh.write(line + "\n")
