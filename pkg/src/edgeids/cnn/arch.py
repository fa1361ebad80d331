"""Block-wise 1D-CNN descriptions and their layer shape trace."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

MAX_BLOCKS = 6


class GeometryError(ValueError):
    """A layer would produce an empty output."""

    def __init__(self, block: int, layer: str, length: int):
        super().__init__(f"block {block} {layer}: output length {length} < 1")
        self.block = block
        self.layer = layer


@dataclass(frozen=True)
class CnnBlock:
    """conv -> batch-norm -> ReLU -> optional pooling -> dropout."""

    filters: int
    kernel: int
    stride: int = 1
    padding: str = "same"
    dropout: float = 0.1
    pool: str | None = None
    pool_size: int = 2

    def __post_init__(self):
        if self.padding not in ("same", "valid"):
            raise ValueError(f"padding must be 'same' or 'valid', got {self.padding!r}")
        if self.pool not in (None, "max", "avg"):
            raise ValueError(f"pool must be None, 'max' or 'avg', got {self.pool!r}")
        if self.filters < 1 or self.kernel < 1 or self.stride < 1 or self.pool_size < 1:
            raise ValueError("filters, kernel, stride and pool_size must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CnnArch:
    blocks: tuple[CnnBlock, ...]
    input_len: int
    n_classes: int

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not 1 <= len(self.blocks) <= MAX_BLOCKS:
            raise ValueError(f"an architecture needs 1..{MAX_BLOCKS} blocks, got {len(self.blocks)}")
        if self.input_len < 1 or self.n_classes < 1:
            raise ValueError("input_len and n_classes must be positive")

    @classmethod
    def head_only(cls, input_len: int, n_classes: int) -> "CnnArch":
        """Dense softmax head with no blocks; for gradient checks, never a search candidate."""
        arch = object.__new__(cls)
        object.__setattr__(arch, "blocks", ())
        object.__setattr__(arch, "input_len", input_len)
        object.__setattr__(arch, "n_classes", n_classes)
        return arch

    def to_dict(self) -> dict:
        return {
            "blocks": [b.to_dict() for b in self.blocks],
            "input_len": self.input_len,
            "n_classes": self.n_classes,
        }

    @classmethod
    def from_dict(cls, d) -> "CnnArch":
        return cls(tuple(CnnBlock(**b) for b in d["blocks"]), int(d["input_len"]), int(d["n_classes"]))


class Layer(NamedTuple):
    kind: str  # input | conv | bn | relu | pool | dense | softmax
    block: int  # -1 outside blocks
    length: int
    channels: int

    @property
    def size(self) -> int:
        return self.length * self.channels


def conv_out_len(length: int, kernel: int, stride: int, padding: str) -> int:
    if padding == "same":
        return math.ceil(length / stride)
    return (length - kernel) // stride + 1


def same_padding(length: int, kernel: int, stride: int) -> tuple[int, int]:
    """Left/right zero padding for 'same' convolution (extra zero goes right)."""
    out = math.ceil(length / stride)
    total = max((out - 1) * stride + kernel - length, 0)
    return total // 2, total - total // 2


def shape_trace(arch: CnnArch) -> list[Layer]:
    """Output shape of every layer, starting with the input sequence."""
    L, C = arch.input_len, 1
    trace = [Layer("input", -1, L, C)]
    for i, blk in enumerate(arch.blocks):
        L = conv_out_len(L, blk.kernel, blk.stride, blk.padding)
        if L < 1:
            raise GeometryError(i, "conv", L)
        C = blk.filters
        trace += [Layer("conv", i, L, C), Layer("bn", i, L, C), Layer("relu", i, L, C)]
        if blk.pool is not None:
            L = L // blk.pool_size
            if L < 1:
                raise GeometryError(i, "pool", L)
            trace.append(Layer("pool", i, L, C))
    trace.append(Layer("dense", -1, 1, arch.n_classes))
    trace.append(Layer("softmax", -1, 1, arch.n_classes))
    return trace


def is_valid(arch: CnnArch) -> bool:
    try:
        shape_trace(arch)
    except GeometryError:
        return False
    return True


def param_shapes(arch: CnnArch) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered parameter names and shapes; this order is also the serialized order."""
    shapes = []
    trace = shape_trace(arch)
    c_in = 1
    for i, blk in enumerate(arch.blocks):
        shapes += [
            (f"conv{i}.w", (blk.kernel, c_in, blk.filters)),
            (f"conv{i}.b", (blk.filters,)),
            (f"bn{i}.gamma", (blk.filters,)),
            (f"bn{i}.beta", (blk.filters,)),
            (f"bn{i}.mean", (blk.filters,)),
            (f"bn{i}.var", (blk.filters,)),
        ]
        c_in = blk.filters
    flat = trace[-3].size
    shapes += [("dense.w", (flat, arch.n_classes)), ("dense.b", (arch.n_classes,))]
    return shapes
