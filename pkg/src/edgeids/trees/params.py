from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

from .._validation import check_fraction, check_positive_int


class Family(str, enum.Enum):
    RF = "RF"
    GBDT_LEAFWISE = "GBDT_LEAFWISE"
    GBDT_LEVELWISE = "GBDT_LEVELWISE"

    @property
    def is_boosted(self) -> bool:
        return self is not Family.RF


@dataclass(frozen=True)
class TreeHyperParams:
    """One point of the tree grid.

    ``num_leaves`` is only read by leaf-wise boosting. ``learning_rate`` and
    ``reg_lambda`` apply to boosting only and sit outside the searched grid.
    """

    family: Family = Family.RF
    n_trees: int = 10
    max_depth: int = 5
    min_child_size: int = 5
    colsample: float = 1.0
    subsample: float = 1.0
    num_leaves: int = 31
    learning_rate: float = 0.1
    reg_lambda: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        check_positive_int("n_trees", self.n_trees, minimum=0)
        check_positive_int("max_depth", self.max_depth, minimum=0)
        check_positive_int("min_child_size", self.min_child_size)
        check_positive_int("num_leaves", self.num_leaves, minimum=2)
        check_fraction("colsample", self.colsample)
        check_fraction("subsample", self.subsample)
        if self.learning_rate <= 0 or self.reg_lambda < 0:
            raise ValueError("learning_rate must be > 0 and reg_lambda >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = self.family.value
        return d

    @classmethod
    def from_dict(cls, d) -> "TreeHyperParams":
        return cls(**d)
