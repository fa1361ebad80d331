"""Analytical Flash / peak-RAM / compute estimates and budget checks.

Tree layout: each node is a 16-byte record (i32 feature, f32 threshold or
leaf value, i32 left, i32 right) and each tree has an 8-byte header
(u32 node count, i32 class tag). Inference keeps an 8-byte stack slot per
level of the deepest tree, a 4-byte score per class, the 4-byte input
vector and 64 bytes of fixed state.

CNN conventions: a multiply-accumulate is 2 FLOPs and a bias add 1;
batch-norm costs 2 FLOPs per element (scale and shift, not folded); all
parameters are float32; RAM is the largest pair of adjacent activation
buffers (ping-pong), weights excluded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .cnn.arch import CnnArch, shape_trace
from .trees import TreeEnsemble

NODE_BYTES = 16
TREE_HEADER_BYTES = 8
STACK_SLOT_BYTES = 8
SCORE_BYTES = 4
INPUT_BYTES = 4
FIXED_STATE_BYTES = 64
FLOAT_BYTES = 4
KB = 1000


@dataclass(frozen=True)
class HardwareBudget:
    flash_max: float
    ram_max: float
    compute_max: float

    def __post_init__(self):
        if min(self.flash_max, self.ram_max, self.compute_max) < 0:
            raise ValueError("budget limits must be non-negative")

    @classmethod
    def default(cls) -> "HardwareBudget":
        """300 KB flash, 50 KB RAM, 1.5M operations."""
        return cls(300 * KB, 50 * KB, 1.5e6)

    @classmethod
    def unbounded(cls) -> "HardwareBudget":
        inf = float("inf")
        return cls(inf, inf, inf)

    def to_dict(self) -> dict:
        return {"flash_max": self.flash_max, "ram_max": self.ram_max, "compute_max": self.compute_max}


@dataclass(frozen=True)
class HardwareProfile:
    flash: int
    ram: int
    compute: int
    compute_unit: str  # "Ops" for trees, "FLOPs" for CNNs

    def __post_init__(self):
        if min(self.flash, self.ram, self.compute) < 0:
            raise ValueError("profile entries must be non-negative")
        if self.compute_unit not in ("Ops", "FLOPs"):
            raise ValueError(f"unknown compute unit {self.compute_unit!r}")

    def to_dict(self) -> dict:
        return {
            "flash_bytes": self.flash,
            "ram_bytes": self.ram,
            "compute": self.compute,
            "compute_unit": self.compute_unit,
        }

    @classmethod
    def from_dict(cls, d) -> "HardwareProfile":
        return cls(int(d["flash_bytes"]), int(d["ram_bytes"]), int(d["compute"]), d["compute_unit"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class BudgetVerdict:
    feasible: bool
    slack: dict
    violated: tuple[str, ...]


def profile_tree_ensemble(m: TreeEnsemble) -> HardwareProfile:
    if not m.trees:
        return HardwareProfile(0, 0, 0, "Ops")
    depths = [t.depth for t in m.trees]
    flash = sum(t.n_nodes * NODE_BYTES + TREE_HEADER_BYTES for t in m.trees)
    ops = sum(dep + 1 for dep in depths)
    ram = (max(depths) * STACK_SLOT_BYTES + m.n_classes * SCORE_BYTES
           + m.n_features * INPUT_BYTES + FIXED_STATE_BYTES)
    return HardwareProfile(flash, ram, ops, "Ops")


def cnn_param_count(arch: CnnArch) -> int:
    trace = shape_trace(arch)
    total, c_in = 0, 1
    for blk in arch.blocks:
        total += blk.kernel * c_in * blk.filters + blk.filters  # conv weights + bias
        total += 4 * blk.filters  # bn gamma, beta, running mean, running var
        c_in = blk.filters
    flat = trace[-3].size
    return total + (flat + 1) * arch.n_classes


def cnn_flops(arch: CnnArch) -> int:
    trace = shape_trace(arch)
    flops = 0
    prev = trace[0]
    for layer in trace[1:]:
        n_out = layer.size
        if layer.kind == "conv":
            k = arch.blocks[layer.block].kernel
            flops += n_out * (2 * k * prev.channels + 1)
        elif layer.kind == "bn":
            flops += 2 * n_out
        elif layer.kind == "relu":
            flops += n_out
        elif layer.kind == "pool":
            flops += n_out * arch.blocks[layer.block].pool_size
        elif layer.kind == "dense":
            flops += 2 * prev.size * n_out + n_out
        elif layer.kind == "softmax":
            flops += 5 * n_out
        prev = layer
    return flops


def cnn_peak_activations(arch: CnnArch) -> int:
    sizes = [layer.size for layer in shape_trace(arch)]
    return max(a + b for a, b in zip(sizes, sizes[1:]))


def profile_cnn(arch: CnnArch) -> HardwareProfile:
    return HardwareProfile(
        FLOAT_BYTES * cnn_param_count(arch),
        FLOAT_BYTES * cnn_peak_activations(arch),
        cnn_flops(arch),
        "FLOPs",
    )


def check_budget(p: HardwareProfile, b: HardwareBudget) -> BudgetVerdict:
    slack = {
        "flash": b.flash_max - p.flash,
        "ram": b.ram_max - p.ram,
        "compute": b.compute_max - p.compute,
    }
    violated = tuple(k for k, v in slack.items() if v < 0)
    return BudgetVerdict(not violated, slack, violated)
