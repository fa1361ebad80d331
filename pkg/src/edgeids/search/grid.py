"""Exhaustive tree hyperparameter grid under a hardware budget."""

from __future__ import annotations

import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..dataio import Dataset
from ..hwcost import HardwareBudget, check_budget, profile_tree_ensemble
from ..metrics import evaluate
from ..trees import Family, TreeHyperParams, train_ensemble
from .results import EVALUATED, REJECTED, CandidateResult, EventLog, overshoot

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpace:
    family: Family = Family.GBDT_LEAFWISE
    n_trees: tuple = (2, 10, 20, 50, 100, 150)
    max_depth: tuple = (5, 10, 15, 20, 25, 30)
    min_child_size: tuple = (5, 10, 20, 30, 40)
    colsample: tuple = (0.6, 0.8, 1.0)
    subsample: tuple = (0.7, 0.8, 1.0)
    num_leaves: tuple = (8, 16, 32, 64)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in ("n_trees", "max_depth", "min_child_size", "colsample", "subsample", "num_leaves"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"grid list {name!r} is empty")
            object.__setattr__(self, name, values)

    def axes(self) -> dict:
        axes = {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_child_size": self.min_child_size,
            "colsample": self.colsample,
            "subsample": self.subsample,
        }
        if self.family is Family.GBDT_LEAFWISE:
            axes["num_leaves"] = self.num_leaves
        return axes

    def size(self) -> int:
        n = 1
        for values in self.axes().values():
            n *= len(values)
        return n


def enumerate_grid(space: GridSpace) -> list[TreeHyperParams]:
    """Full Cartesian product, last axis varying fastest."""
    axes = space.axes()
    names = list(axes)
    return [
        TreeHyperParams(family=space.family, **dict(zip(names, combo)))
        for combo in itertools.product(*axes.values())
    ]


@dataclass
class GridSearchResult:
    ranked: list[CandidateResult]
    history: list[CandidateResult]
    best_infeasible: CandidateResult | None = None
    budget: HardwareBudget = field(default_factory=HardwareBudget.default)

    @property
    def best(self) -> CandidateResult | None:
        return self.ranked[0] if self.ranked else None

    @property
    def feasible(self) -> bool:
        return bool(self.ranked)

    def summary(self) -> dict:
        return {
            "search": "grid",
            "budget": self.budget.to_dict(),
            "n_candidates": len(self.history),
            "n_feasible": len(self.ranked),
            "best": self.best.to_record() if self.best else None,
            "best_infeasible": self.best_infeasible.to_record() if self.best_infeasible else None,
        }


def _run_one(index, hp, budget, train, val, seed) -> CandidateResult:
    t0 = time.perf_counter()
    model = train_ensemble(train, hp, seed)
    profile = profile_tree_ensemble(model)
    if not check_budget(profile, budget).feasible:
        return CandidateResult(hp.to_dict(), profile, REJECTED, None, index,
                               wall_time=time.perf_counter() - t0)
    acc = evaluate(model, val).accuracy
    return CandidateResult(hp.to_dict(), profile, EVALUATED, acc, index,
                           wall_time=time.perf_counter() - t0, model=model)


def constrained_grid_search(
    space: GridSpace,
    budget: HardwareBudget,
    train: Dataset,
    val: Dataset,
    seed: int = 0,
    *,
    workers: int = 1,
    event_log: EventLog | None = None,
    keep_models: int = 1,
) -> GridSearchResult:
    """Train every grid point, profile the trained structure, drop budget violators.

    Tree cost depends on the learned structure, so profiling happens after
    training. Every candidate uses the same ``seed``. Survivors are ranked
    by validation accuracy, then lower compute, then lower flash. Only the
    top ``keep_models`` survivors keep their trained ensembles.
    """
    grid = enumerate_grid(space)
    log.info("grid search over %d %s configurations", len(grid), space.family.value)

    def job(item):
        i, hp = item
        return _run_one(i, hp, budget, train, val, seed)

    history: list[CandidateResult] = []
    kept: list[CandidateResult] = []

    def collect(rec: CandidateResult):
        history.append(rec)
        if event_log is not None:
            event_log.write({"search": "grid", **rec.to_record()})
        if rec.status == EVALUATED:
            kept.append(rec)
            kept.sort(key=CandidateResult.rank_key)
            for dropped in kept[keep_models:]:
                dropped.model = None
            del kept[keep_models:]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(job, enumerate(grid)):
                collect(rec)
    else:
        for item in enumerate(grid):
            collect(job(item))

    ranked = sorted((r for r in history if r.status == EVALUATED), key=CandidateResult.rank_key)
    rejected = [r for r in history if r.status == REJECTED]
    best_bad = min(rejected, key=lambda r: (overshoot(r.profile, budget), r.index), default=None)
    return GridSearchResult(ranked, history, best_bad, budget)
