"""Brute-force reference counters, written without the package's helpers."""

import math

import numpy as np

from edgeids.cnn import CnnArch, CnnBlock
from edgeids.trees import Family, Tree, TreeEnsemble


def tree_oracle(m: TreeEnsemble):
    """(flash, ops, ram) by recursive walk from each root."""
    flash = ops = 0
    deepest = 0
    for t in m.trees:
        def walk(i, depth):
            if t.feature[i] == -1:
                return 1, depth
            nl, dl = walk(int(t.left[i]), depth + 1)
            nr, dr = walk(int(t.right[i]), depth + 1)
            return 1 + nl + nr, max(dl, dr)

        nodes, depth = walk(0, 0)
        flash += nodes * 16 + 8
        ops += depth + 1
        deepest = max(deepest, depth)
    ram = deepest * 8 + m.n_classes * 4 + m.n_features * 4 + 64
    return flash, ops, ram


def cnn_oracle(arch: CnnArch):
    """(flops, params, ram_bytes) by stepping through the layers one at a time."""
    L, C = arch.input_len, 1
    flops = params = 0
    sizes = [L * C]
    for b in arch.blocks:
        if b.padding == "same":
            L_out = math.ceil(L / b.stride)
        else:
            L_out = (L - b.kernel) // b.stride + 1
        assert L_out >= 1
        flops += L_out * b.filters * (2 * b.kernel * C + 1)
        params += b.kernel * C * b.filters + b.filters
        C, L = b.filters, L_out
        sizes.append(L * C)  # conv
        flops += 2 * L * C
        params += 4 * C
        sizes.append(L * C)  # batch-norm
        flops += L * C
        sizes.append(L * C)  # relu
        if b.pool is not None:
            L = L // b.pool_size
            assert L >= 1
            flops += L * C * b.pool_size
            sizes.append(L * C)
    k = arch.n_classes
    flops += 2 * L * C * k + k
    params += (L * C + 1) * k
    sizes.append(k)
    flops += 5 * k
    sizes.append(k)
    ram = 4 * max(a + b for a, b in zip(sizes[:-1], sizes[1:]))
    return flops, params, ram


def random_tree(rng, n_features, n_classes, max_depth, boosted):
    """Random proper binary tree with depth <= max_depth, built breadth first."""
    feature, thr, left, right, value = [], [], [], [], []

    def new_leaf():
        feature.append(-1)
        thr.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(rng.normal()) if boosted else float(rng.integers(n_classes)))
        return len(feature) - 1

    frontier = [(new_leaf(), 0)]
    while frontier:
        node, depth = frontier.pop(0)
        if depth < max_depth and rng.random() < 0.7:
            feature[node] = int(rng.integers(n_features))
            thr[node] = float(rng.random())
            value[node] = 0.0
            l, r = new_leaf(), new_leaf()
            left[node], right[node] = l, r
            frontier += [(l, depth + 1), (r, depth + 1)]
    return feature, thr, left, right, value


def random_ensemble(rng, max_trees=20, max_depth=6):
    family = [Family.RF, Family.GBDT_LEAFWISE, Family.GBDT_LEVELWISE][int(rng.integers(3))]
    d = int(rng.integers(1, 30))
    k = int(rng.integers(2, 16))
    n = int(rng.integers(1, max_trees + 1))
    trees = []
    for i in range(n):
        arrays = random_tree(rng, d, k, int(rng.integers(0, max_depth + 1)), family.is_boosted)
        trees.append(Tree(*arrays, class_tag=(i % k) if family.is_boosted else -1))
    return TreeEnsemble(family, trees, k, d)


def random_valid_arch(rng, input_len=47, n_classes=15):
    while True:
        blocks = []
        for _ in range(int(rng.integers(1, 7))):
            blocks.append(CnnBlock(
                filters=int(rng.integers(16, 257)),
                kernel=int(rng.integers(2, 11)),
                stride=int(rng.integers(1, 11)),
                padding=["same", "valid"][int(rng.integers(2))],
                dropout=0.1,
                pool=[None, "max", "avg"][int(rng.integers(3))],
                pool_size=int(rng.integers(2, 4)),
            ))
        arch = CnnArch(tuple(blocks), input_len, n_classes)
        try:
            cnn_oracle(arch)
        except AssertionError:
            continue
        return arch


def two_pass_std(values):
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return 0.0
    return float(np.sqrt(np.mean((v - v.mean()) ** 2)))
