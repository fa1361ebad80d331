"""Random forest and gradient-boosted tree training."""

from __future__ import annotations

import heapq
import math
from collections import deque
from typing import Callable

import numpy as np

from ..dataio import Dataset
from ._splitter import find_best_split
from ._tree import LEAF, Tree, TreeEnsemble, softmax
from .params import Family, TreeHyperParams

# boosted splits must improve the objective by more than this
_MIN_GAIN = 1e-12


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.support, self.depth = [], [], []

    def add(self, depth, n, value) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        self.support.append(n)
        self.depth.append(depth)
        return len(self.feature) - 1

    def split(self, node, feature, threshold, left, right):
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right
        self.value[node] = 0.0

    def build(self, class_tag) -> Tree:
        return Tree(
            self.feature, self.threshold, self.left, self.right, self.value,
            class_tag=class_tag, support=np.asarray(self.support, dtype=np.int64),
        )


def _grow(
    X: np.ndarray,
    stats: np.ndarray,
    rows: np.ndarray,
    *,
    criterion: str,
    max_depth: int,
    min_child: int,
    features_for: Callable[[], np.ndarray],
    leaf_value: Callable[[np.ndarray], float],
    is_pure: Callable[[np.ndarray], bool],
    reg_lambda: float = 1.0,
    num_leaves: int | None = None,
    class_tag: int = -1,
) -> Tree:
    """Grow one tree breadth-first, or best-first when ``num_leaves`` is set.

    Gini nodes split whenever impure, even at zero gain (XOR-like data needs
    that); Newton nodes split only on strictly positive gain.
    """
    b = _Builder()
    root = b.add(0, rows.size, leaf_value(stats[rows]))
    min_gain = -np.inf if criterion == "gini" else _MIN_GAIN

    def best_for(node_rows, depth):
        if depth >= max_depth or node_rows.size < 2 * min_child:
            return None
        if is_pure(stats[node_rows]):
            return None
        s = find_best_split(X[node_rows], stats[node_rows], features_for(), min_child,
                            criterion, reg_lambda)
        if s is None or s.gain <= min_gain:
            return None
        return s

    def apply_split(node, node_rows, depth, s):
        go_left = X[node_rows, s.feature] <= s.threshold
        lrows, rrows = node_rows[go_left], node_rows[~go_left]
        assert lrows.size == s.n_left and lrows.size >= min_child and rrows.size >= min_child
        li = b.add(depth + 1, lrows.size, leaf_value(stats[lrows]))
        ri = b.add(depth + 1, rrows.size, leaf_value(stats[rrows]))
        b.split(node, s.feature, s.threshold, li, ri)
        return (li, lrows), (ri, rrows)

    if num_leaves is None:
        queue = deque([(root, rows, 0)])
        while queue:
            node, node_rows, depth = queue.popleft()
            s = best_for(node_rows, depth)
            if s is None:
                continue
            for child, child_rows in apply_split(node, node_rows, depth, s):
                queue.append((child, child_rows, depth + 1))
    else:
        heap = []
        pending = {}

        def push(node, node_rows, depth):
            s = best_for(node_rows, depth)
            if s is not None:
                pending[node] = (node_rows, depth, s)
                heapq.heappush(heap, (-s.gain, node))

        push(root, rows, 0)
        n_leaves = 1
        while heap and n_leaves < num_leaves:
            _, node = heapq.heappop(heap)
            node_rows, depth, s = pending.pop(node)
            for child, child_rows in apply_split(node, node_rows, depth, s):
                push(child, child_rows, depth + 1)
            n_leaves += 1

    tree = b.build(class_tag)
    assert tree.depth <= max_depth
    return tree


def _n_sampled(fraction: float, total: int) -> int:
    return max(1, min(total, int(math.ceil(fraction * total - 1e-9))))


def _as_float32(train: Dataset) -> np.ndarray:
    return np.ascontiguousarray(train.features, dtype=np.float32)


def train_random_forest(train: Dataset, hp: TreeHyperParams, seed: int = 0) -> TreeEnsemble:
    """Bagged Gini trees with per-split feature subsampling.

    Each tree sees ``round(subsample * n)`` rows drawn with replacement and
    ``ceil(colsample * d)`` candidate features at every split.
    """
    if hp.family is not Family.RF:
        raise ValueError(f"train_random_forest needs family RF, got {hp.family.value}")
    X = _as_float32(train)
    n, d = X.shape
    K = max(train.n_classes, 1)
    Y = np.zeros((n, K), dtype=np.float64)
    Y[np.arange(n), train.labels] = 1.0
    n_boot = max(1, int(round(hp.subsample * n)))
    n_feat = _n_sampled(hp.colsample, d)

    trees = []
    for t in range(hp.n_trees):
        rng = np.random.default_rng([seed, t])
        rows = np.sort(rng.integers(0, n, size=n_boot))

        def features_for(rng=rng):
            return np.sort(rng.choice(d, size=n_feat, replace=False))

        trees.append(_grow(
            X, Y, rows,
            criterion="gini",
            max_depth=hp.max_depth,
            min_child=hp.min_child_size,
            features_for=features_for,
            leaf_value=lambda s: float(np.argmax(s.sum(axis=0))),
            is_pure=lambda s: np.count_nonzero(s.sum(axis=0)) <= 1,
        ))
    return TreeEnsemble(Family.RF, trees, K, d, hyperparams=hp)


def multiclass_log_loss(scores: np.ndarray, labels: np.ndarray) -> float:
    z = scores - scores.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(labels.size), labels].mean())


def train_gbdt(train: Dataset, hp: TreeHyperParams, seed: int = 0) -> TreeEnsemble:
    """Softmax gradient boosting with one Newton-step regression tree per class per round.

    Rows are subsampled per tree without replacement; features are sampled
    once per tree. Leaf values are ``-learning_rate * G / (H + reg_lambda)``.
    """
    if not hp.family.is_boosted:
        raise ValueError(f"train_gbdt needs a boosted family, got {hp.family.value}")
    X = _as_float32(train)
    n, d = X.shape
    K = max(train.n_classes, 1)
    Y = np.zeros((n, K), dtype=np.float64)
    Y[np.arange(n), train.labels] = 1.0
    n_rows = _n_sampled(hp.subsample, n)
    n_feat = _n_sampled(hp.colsample, d)
    leafwise = hp.family is Family.GBDT_LEAFWISE
    lr, lam = hp.learning_rate, hp.reg_lambda

    def leaf_value(s):
        g, h = s.sum(axis=0)
        return float(-lr * g / (h + lam))

    scores = np.zeros((n, K), dtype=np.float64)
    losses = []
    trees = []
    for r in range(hp.n_trees):
        losses.append(multiclass_log_loss(scores, train.labels))
        P = softmax(scores)
        for k in range(K):
            rng = np.random.default_rng([seed, r, k])
            if n_rows < n:
                rows = np.sort(rng.choice(n, size=n_rows, replace=False))
            else:
                rows = np.arange(n)
            feats = np.sort(rng.choice(d, size=n_feat, replace=False))
            gh = np.empty((n, 2), dtype=np.float64)
            gh[:, 0] = P[:, k] - Y[:, k]
            gh[:, 1] = np.maximum(P[:, k] * (1.0 - P[:, k]), 1e-16)
            tree = _grow(
                X, gh, rows,
                criterion="newton",
                max_depth=hp.max_depth,
                min_child=hp.min_child_size,
                features_for=lambda feats=feats: feats,
                leaf_value=leaf_value,
                is_pure=lambda s: False,
                reg_lambda=lam,
                num_leaves=hp.num_leaves if leafwise else None,
                class_tag=k,
            )
            scores[:, k] += tree.predict_value(X)
            trees.append(tree)
    losses.append(multiclass_log_loss(scores, train.labels))
    return TreeEnsemble(hp.family, trees, K, d, learning_rate=lr, hyperparams=hp, train_loss=losses)


def train_ensemble(train: Dataset, hp: TreeHyperParams, seed: int = 0) -> TreeEnsemble:
    if hp.family is Family.RF:
        return train_random_forest(train, hp, seed)
    return train_gbdt(train, hp, seed)
