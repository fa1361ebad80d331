"""Evolutionary hardware-aware search over block-wise 1D-CNNs.

Candidates are profiled before training and discarded untrained when they
exceed the budget. Each generation mutates the current parent until enough
budget-feasible children exist, trains them, and promotes the best child
if it beats the parent.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol

import numpy as np

from ..cnn.arch import CnnArch, CnnBlock, is_valid
from ..cnn.model import init_model
from ..cnn.train import TrainConfig, train
from ..dataio import Dataset
from ..hwcost import HardwareBudget, check_budget, profile_cnn
from ..metrics import evaluate
from .results import EVALUATED, REJECTED, CandidateResult, EventLog, NoFeasibleCandidate

log = logging.getLogger(__name__)

RESAMPLE_CAP = 100
BLOCK_ATTRS = ("filters", "kernel", "stride", "padding", "dropout", "pool", "pool_size")


@dataclass(frozen=True)
class NasSpace:
    """Per-block attribute ranges (inclusive)."""

    filters: tuple[int, int] = (16, 256)
    kernel: tuple[int, int] = (2, 10)
    stride: tuple[int, int] = (1, 10)
    dropout: tuple[float, float] = (0.1, 0.5)
    pool: tuple = (None, "max", "avg")
    pool_size: tuple[int, int] = (2, 3)
    padding: tuple[str, ...] = ("same", "valid")
    initial_blocks: tuple[int, int] = (1, 3)

    def sample(self, attr: str, rng: np.random.Generator):
        if attr == "dropout":
            lo, hi = self.dropout
            return round(float(rng.uniform(lo, hi)), 2)
        if attr in ("pool", "padding"):
            options = getattr(self, attr)
            return options[int(rng.integers(len(options)))]
        lo, hi = getattr(self, attr)
        return int(rng.integers(lo, hi + 1))

    def sample_block(self, rng: np.random.Generator) -> CnnBlock:
        return CnnBlock(**{a: self.sample(a, rng) for a in BLOCK_ATTRS})

    def contains(self, blk: CnnBlock) -> bool:
        ok = True
        for attr in ("filters", "kernel", "stride", "dropout", "pool_size"):
            lo, hi = getattr(self, attr)
            ok &= lo <= getattr(blk, attr) <= hi
        return ok and blk.pool in self.pool and blk.padding in self.padding


@dataclass(frozen=True)
class NasConfig:
    generations: int = 100
    children_per_generation: int = 15
    initial_population: int = 10
    max_blocks: int = 6
    p_add: float = 0.25
    p_remove: float = 0.25
    p_modify: float = 0.5
    attempt_cap: int = 200
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if abs(self.p_add + self.p_remove + self.p_modify - 1.0) > 1e-9:
            raise ValueError("mutation probabilities must sum to 1")
        if min(self.generations, self.children_per_generation, self.initial_population,
               self.max_blocks, self.attempt_cap, self.workers) < 1:
            raise ValueError("NAS counts must be positive")


def candidate_rng(seed: int, generation: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, generation, index])


def candidate_seed(seed: int, generation: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, generation, index, 1]).generate_state(1)[0])


def random_arch(space: NasSpace, rng: np.random.Generator, input_len: int, n_classes: int) -> CnnArch:
    """Random 1-3 block architecture with a valid shape trace."""
    lo, hi = space.initial_blocks
    for _ in range(RESAMPLE_CAP):
        n = int(rng.integers(lo, hi + 1))
        arch = CnnArch(tuple(space.sample_block(rng) for _ in range(n)), input_len, n_classes)
        if is_valid(arch):
            return arch
    raise RuntimeError(f"no valid architecture after {RESAMPLE_CAP} samples for input_len={input_len}")


def _choose_op(n_blocks, cfg: NasConfig, rng) -> str:
    ops = ["add", "remove", "modify"]
    weights = np.array([cfg.p_add, cfg.p_remove, cfg.p_modify])
    op = ops[int(rng.choice(3, p=weights))]
    if op == "remove" and n_blocks <= 1:
        return "modify"
    if op == "add" and n_blocks >= cfg.max_blocks:
        weights[0] = 0.0
        if weights.sum() == 0:
            return "modify"
        op = ops[int(rng.choice(3, p=weights / weights.sum()))]
        if op == "remove" and n_blocks <= 1:
            return "modify"
    return op


def mutate(parent: CnnArch, rng: np.random.Generator, space: NasSpace | None = None,
           cfg: NasConfig | None = None) -> tuple[CnnArch, bool]:
    """Apply one add/remove/modify mutation.

    Returns ``(child, True)``, or ``(parent, False)`` when no valid child
    turned up within the resample cap.
    """
    space = space or NasSpace()
    cfg = cfg or NasConfig()
    blocks = list(parent.blocks)
    for _ in range(RESAMPLE_CAP):
        op = _choose_op(len(blocks), cfg, rng)
        if op == "add":
            pos = int(rng.integers(len(blocks) + 1))
            new = blocks[:pos] + [space.sample_block(rng)] + blocks[pos:]
        elif op == "remove":
            pos = int(rng.integers(len(blocks)))
            new = blocks[:pos] + blocks[pos + 1 :]
        else:
            pos = int(rng.integers(len(blocks)))
            attr = BLOCK_ATTRS[int(rng.integers(len(BLOCK_ATTRS)))]
            old = getattr(blocks[pos], attr)
            value = old
            for _ in range(RESAMPLE_CAP):
                value = space.sample(attr, rng)
                if value != old:
                    break
            if value == old:
                continue
            new = list(blocks)
            new[pos] = replace(blocks[pos], **{attr: value})
        child = CnnArch(tuple(new), parent.input_len, parent.n_classes)
        if is_valid(child):
            return child, True
    return parent, False


class Trainer(Protocol):
    def __call__(self, arch: CnnArch, train: Dataset, val: Dataset, seed: int) -> tuple[float, object]:
        ...


@dataclass
class CnnTrainer:
    """Default NAS trainer: fresh init, full training recipe, validation accuracy."""

    config: TrainConfig = field(default_factory=TrainConfig)

    def __call__(self, arch, train_data, val_data, seed):
        cfg = replace(self.config, seed=seed)
        model, _ = train(init_model(arch, seed), train_data, val_data, cfg)
        return evaluate(model, val_data).accuracy, model


@dataclass
class NasResult:
    best: CandidateResult
    history: list[CandidateResult]
    parents: list[CandidateResult]
    best_so_far: list[float]
    terminated_early: bool = False
    diagnostic: str = ""

    def summary(self) -> dict:
        return {
            "search": "nas",
            "n_candidates": len(self.history),
            "n_trained": sum(r.status == EVALUATED for r in self.history),
            "best": self.best.to_record(),
            "best_so_far": self.best_so_far,
            "terminated_early": self.terminated_early,
            "diagnostic": self.diagnostic,
        }


def _train_all(cands, trainer, train_data, val_data, cfg: NasConfig, keep: Callable):
    def job(c: CandidateResult):
        t0 = time.perf_counter()
        seed = candidate_seed(cfg.seed, c.generation, c.index)
        acc, model = trainer(CnnArch.from_dict(c.descriptor), train_data, val_data, seed)
        c.val_accuracy = float(acc)
        c.wall_time += time.perf_counter() - t0
        c.model = model
        return c

    if cfg.workers > 1 and len(cands) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            done = list(pool.map(job, cands))
    else:
        done = [job(c) for c in cands]
    for c in done:
        keep(c)
    return done


def evolve(
    cfg: NasConfig,
    space: NasSpace,
    budget: HardwareBudget,
    train_data: Dataset,
    val_data: Dataset,
    trainer: Trainer | None = None,
    *,
    event_log: EventLog | None = None,
) -> NasResult:
    """Run the search; the winner is the best validation accuracy over all generations.

    Candidate ``i`` of generation ``g`` draws from an RNG seeded by
    ``(cfg.seed, g, i)``, so results do not depend on ``cfg.workers``.
    """
    trainer = trainer or CnnTrainer()
    d, k = train_data.n_features, max(train_data.n_classes, 1)
    history: list[CandidateResult] = []
    best_holder: list[CandidateResult] = []

    def keep_best(c: CandidateResult):
        if not best_holder or c.rank_key() < best_holder[0].rank_key():
            if best_holder:
                best_holder[0].model = None
            best_holder[:] = [c]
        else:
            c.model = None

    def record(c: CandidateResult):
        history.append(c)
        if event_log is not None:
            event_log.write({"search": "nas", **c.to_record()})

    def profiled(arch, gen, idx, t0):
        prof = profile_cnn(arch)
        status = EVALUATED if check_budget(prof, budget).feasible else REJECTED
        return CandidateResult(arch.to_dict(), prof, status, None, idx, gen,
                               wall_time=time.perf_counter() - t0)

    parents: list[CandidateResult] = []
    gen0 = []
    for i in range(cfg.initial_population):
        t0 = time.perf_counter()
        arch = random_arch(space, candidate_rng(cfg.seed, 0, i), d, k)
        gen0.append(profiled(arch, 0, i, t0))
    feasible = [c for c in gen0 if c.status == EVALUATED]
    for c in gen0:
        if c.status == REJECTED:
            record(c)
    if not feasible:
        raise NoFeasibleCandidate("no budget-feasible architecture in the initial population")
    for c in _train_all(feasible, trainer, train_data, val_data, cfg, keep_best):
        record(c)
    parent = min(feasible, key=CandidateResult.rank_key)
    parents.append(parent)
    best_so_far = [best_holder[0].val_accuracy]
    log.info("generation 0: parent accuracy %.4f", parent.val_accuracy)

    terminated, diagnostic = False, ""
    for g in range(1, cfg.generations + 1):
        parent_arch = CnnArch.from_dict(parent.descriptor)
        children = []
        attempts = 0
        while len(children) < cfg.children_per_generation and attempts < cfg.attempt_cap:
            t0 = time.perf_counter()
            child, ok = mutate(parent_arch, candidate_rng(cfg.seed, g, attempts), space, cfg)
            idx = attempts
            attempts += 1
            if not ok:
                continue
            c = profiled(child, g, idx, t0)
            if c.status == REJECTED:
                record(c)
            else:
                children.append(c)
        if not children:
            terminated = True
            diagnostic = (f"generation {g}: no budget-feasible child within "
                          f"{cfg.attempt_cap} mutation attempts")
            log.warning(diagnostic)
            break
        for c in _train_all(children, trainer, train_data, val_data, cfg, keep_best):
            record(c)
        top = min(children, key=CandidateResult.rank_key)
        if top.val_accuracy > parent.val_accuracy:
            parent = top
        parents.append(parent)
        best_so_far.append(best_holder[0].val_accuracy)
        log.info("generation %d: %d children, parent %.4f, best %.4f", g, len(children),
                 parent.val_accuracy, best_so_far[-1])
    return NasResult(best_holder[0], history, parents, best_so_far, terminated, diagnostic)
