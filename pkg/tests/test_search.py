import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeids.cnn import CnnArch, CnnBlock, TrainConfig, shape_trace
from edgeids.dataio import stratified_split
from edgeids.hwcost import HardwareBudget, profile_cnn
from edgeids.search import (
    EVALUATED,
    REJECTED,
    CnnTrainer,
    EventLog,
    GridSpace,
    NasConfig,
    NasSpace,
    NoFeasibleCandidate,
    constrained_grid_search,
    enumerate_grid,
    evolve,
    mutate,
    random_arch,
)
from edgeids.trees import Family
from synth import blobs, hidden_tree_data

# --- grid ------------------------------------------------------------------------------------


def test_default_grid_sizes():
    # product of the list lengths: 6 * 6 * 5 * 3 * 3, times 4 leaf counts for leaf-wise
    assert len(enumerate_grid(GridSpace(Family.RF))) == 6 * 6 * 5 * 3 * 3 == 1620
    assert len(enumerate_grid(GridSpace(Family.GBDT_LEVELWISE))) == 1620
    assert len(enumerate_grid(GridSpace(Family.GBDT_LEAFWISE))) == 1620 * 4 == 6480


def test_grid_exhaustive_and_lexicographic():
    space = GridSpace(Family.GBDT_LEAFWISE)
    grid = enumerate_grid(space)
    keys = [(h.n_trees, h.max_depth, h.min_child_size, h.colsample, h.subsample, h.num_leaves)
            for h in grid]
    assert len(set(keys)) == len(keys)
    pos = [tuple(getattr(space, a).index(v) for a, v in zip(space.axes(), k)) for k in keys]
    assert pos == sorted(pos)


def test_single_value_grid():
    space = GridSpace(Family.RF, (5,), (3,), (2,), (1.0,), (1.0,))
    assert len(enumerate_grid(space)) == 1


def test_empty_grid_list_rejected():
    with pytest.raises(ValueError):
        GridSpace(Family.RF, n_trees=())


def _small_space(family=Family.GBDT_LEVELWISE):
    return GridSpace(family, (2, 5), (2, 3), (5,), (1.0,), (1.0,), (8,))


def _split(data, seed=0):
    return stratified_split(data, 0.2, seed)


def test_zero_flash_budget_rejects_everything():
    tr, va = _split(blobs(n=200))
    res = constrained_grid_search(_small_space(), HardwareBudget(0, 1e9, 1e9), tr, va)
    assert not res.feasible and res.best is None
    assert all(r.status == REJECTED for r in res.history)
    assert res.best_infeasible is not None
    assert res.summary()["n_feasible"] == 0


def test_unbounded_ranking_is_accuracy_order():
    tr, va = _split(hidden_tree_data(n=600, d=6, noise=0.1, seed=1)[0])
    res = constrained_grid_search(_small_space(Family.RF), HardwareBudget.unbounded(), tr, va, seed=3)
    assert len(res.ranked) == len(res.history) == 4
    keys = [(-r.val_accuracy, r.profile.compute, r.profile.flash) for r in res.ranked]
    assert keys == sorted(keys)
    assert res.best.model is not None
    assert all(r.model is None for r in res.ranked[1:])


def test_evaluated_candidates_are_feasible():
    tr, va = _split(blobs(n=200))
    budget = HardwareBudget(400, 1e9, 1e9)
    res = constrained_grid_search(_small_space(), budget, tr, va)
    for r in res.history:
        fits = r.profile.flash <= 400
        assert (r.status == EVALUATED) == fits
        if fits:
            assert 0.0 <= r.val_accuracy <= 1.0


def test_depth3_generator_is_recovered():
    data, clean = hidden_tree_data(n=2000, d=8, depth=3, noise=0.0, seed=5)
    # the generating tree labels every row, so a depth-3 learner can reach 1.0
    assert np.array_equal(clean, data.labels)
    tr, va = _split(data)
    space = GridSpace(Family.GBDT_LEVELWISE, (20,), (3, 5), (5,), (1.0,), (1.0,))
    res = constrained_grid_search(space, HardwareBudget.default(), tr, va)
    assert res.best.val_accuracy >= 0.95


def test_grid_workers_do_not_change_result():
    tr, va = _split(blobs(n=200))
    a = constrained_grid_search(_small_space(), HardwareBudget.unbounded(), tr, va, seed=2)
    b = constrained_grid_search(_small_space(), HardwareBudget.unbounded(), tr, va, seed=2, workers=3)
    assert [r.to_record() | {"wall_time_s": 0} for r in a.history] == \
           [r.to_record() | {"wall_time_s": 0} for r in b.history]


def test_event_log(tmp_path):
    tr, va = _split(blobs(n=200))
    path = tmp_path / "ev.ndjson"
    constrained_grid_search(_small_space(), HardwareBudget.default(), tr, va, event_log=EventLog(path))
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    rec = json.loads(lines[0])
    assert {"descriptor", "profile", "status", "val_accuracy", "wall_time_s"} <= set(rec)


# --- architecture sampling and mutation ----------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_arch_valid_and_in_range(seed):
    space = NasSpace()
    arch = random_arch(space, np.random.default_rng(seed), 47, 15)
    shape_trace(arch)
    assert 1 <= len(arch.blocks) <= 3
    assert all(space.contains(b) for b in arch.blocks)
    again = random_arch(space, np.random.default_rng(seed), 47, 15)
    assert again == arch


def test_remove_on_single_block_becomes_modify():
    cfg = NasConfig(p_add=0.0, p_remove=1.0, p_modify=0.0)
    parent = CnnArch((CnnBlock(32, 3),), 47, 15)
    for s in range(20):
        child, ok = mutate(parent, np.random.default_rng(s), NasSpace(), cfg)
        assert ok and len(child.blocks) == 1 and child != parent


def test_add_at_max_blocks_is_redrawn():
    parent = CnnArch(tuple(CnnBlock(16, 2) for _ in range(6)), 47, 15)
    for s in range(30):
        child, ok = mutate(parent, np.random.default_rng(s))
        assert ok and len(child.blocks) <= 6


def _one_slot_edit(parent, child):
    a, b = list(parent.blocks), list(child.blocks)
    if len(b) == len(a) + 1:
        return any(b[:i] + b[i + 1:] == a for i in range(len(b)))
    if len(b) == len(a) - 1:
        return any(a[:i] + a[i + 1:] == b for i in range(len(a)))
    diff = [i for i in range(len(a)) if a[i] != b[i]]
    if len(diff) != 1:
        return False
    i = diff[0]
    changed = [f for f in ("filters", "kernel", "stride", "padding", "dropout", "pool", "pool_size")
               if getattr(a[i], f) != getattr(b[i], f)]
    return len(changed) == 1


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mutation_changes_exactly_one_slot(seed):
    rng = np.random.default_rng(seed)
    parent = random_arch(NasSpace(), rng, 47, 15)
    child, ok = mutate(parent, rng)
    if ok:
        shape_trace(child)
        assert _one_slot_edit(parent, child)
    else:
        assert child == parent


def test_nas_config_validation():
    with pytest.raises(ValueError):
        NasConfig(p_add=0.5, p_remove=0.5, p_modify=0.5)
    with pytest.raises(ValueError):
        NasConfig(generations=0)


# --- evolution ------------------------------------------------------------------------------------

SMALL_SPACE = NasSpace(filters=(4, 12), kernel=(2, 4), stride=(1, 2), initial_blocks=(1, 2))
FAST_TRAIN = CnnTrainer(TrainConfig(max_epochs=3, batch_size=64))


def _nas_data():
    return _split(blobs(n=240, d=10, n_classes=3, seed=7))


def _winner_bytes(res):
    return b"".join(res.best.model.params[k].tobytes() for k in sorted(res.best.model.params))


def test_nas_deterministic_across_workers():
    tr, va = _nas_data()
    cfg = NasConfig(generations=3, children_per_generation=2, initial_population=3, seed=11)
    a = evolve(cfg, SMALL_SPACE, HardwareBudget.default(), tr, va, FAST_TRAIN)
    b = evolve(replace(cfg, workers=3), SMALL_SPACE, HardwareBudget.default(), tr, va, FAST_TRAIN)
    assert a.best.descriptor == b.best.descriptor
    assert a.best.val_accuracy == b.best.val_accuracy
    assert _winner_bytes(a) == _winner_bytes(b)
    assert np.all(np.diff(a.best_so_far) >= 0)
    assert len(a.best_so_far) == 4


def test_nas_never_trains_infeasible():
    tr, va = _nas_data()
    # tight flash cap so that some sampled architectures get rejected
    budget = HardwareBudget(4 * 1500, 1e9, 1e9)
    cfg = NasConfig(generations=2, children_per_generation=2, initial_population=6, seed=1)
    res = evolve(cfg, SMALL_SPACE, budget, tr, va, FAST_TRAIN)
    for c in res.history:
        fits = c.profile.flash <= budget.flash_max
        assert (c.status == EVALUATED) == fits
        assert (c.val_accuracy is not None) == fits


def test_unbounded_nas_has_no_rejections():
    tr, va = _nas_data()
    cfg = NasConfig(generations=2, children_per_generation=2, initial_population=3)
    res = evolve(cfg, SMALL_SPACE, HardwareBudget.unbounded(), tr, va, FAST_TRAIN)
    assert all(c.status == EVALUATED for c in res.history)
    assert res.best.val_accuracy == max(c.val_accuracy for c in res.history)


def test_no_feasible_initial_population():
    tr, va = _nas_data()
    with pytest.raises(NoFeasibleCandidate):
        evolve(NasConfig(generations=1, initial_population=3), SMALL_SPACE, HardwareBudget(0, 0, 0),
               tr, va, FAST_TRAIN)


def test_stalled_generation_terminates_early():
    tr, va = _nas_data()
    # every attribute but filters is pinned; the budget admits only the
    # 16-filter single block, so no mutation can produce a feasible child
    space = NasSpace(filters=(16, 17), kernel=(2, 2), stride=(1, 1), dropout=(0.1, 0.1),
                     pool=(None,), pool_size=(2, 2), padding=("same",), initial_blocks=(1, 1))
    cap = profile_cnn(CnnArch((CnnBlock(16, 2),), 10, 3))
    budget = HardwareBudget(cap.flash, cap.ram, cap.compute)
    calls = []

    def stub(arch, train_data, val_data, seed):
        calls.append(arch)
        return 0.5, None

    cfg = NasConfig(generations=3, children_per_generation=2, initial_population=10, attempt_cap=5)
    res = evolve(cfg, space, budget, tr, va, stub)
    assert res.terminated_early and "generation 1" in res.diagnostic
    assert all(a.blocks[0].filters == 16 for a in calls)
