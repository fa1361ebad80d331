"""Flat-array decision trees and ensemble inference."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import Family, TreeHyperParams

LEAF = -1


@dataclass
class Tree:
    """Binary tree stored as parallel node arrays (node 0 is the root).

    Internal nodes send ``x[feature] <= threshold`` left. For leaves,
    ``value`` holds the class id (forest) or the shrunken score (boosting).
    ``class_tag`` names the class a boosted tree scores, -1 for forests.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    class_tag: int = -1
    support: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.feature = np.asarray(self.feature, dtype=np.int32)
        self.threshold = np.asarray(self.threshold, dtype=np.float32)
        self.left = np.asarray(self.left, dtype=np.int32)
        self.right = np.asarray(self.right, dtype=np.int32)
        self.value = np.asarray(self.value, dtype=np.float32)
        n = self.feature.size
        if not (self.threshold.size == self.left.size == self.right.size == self.value.size == n):
            raise ValueError("node arrays differ in length")
        if n == 0:
            raise ValueError("a tree needs at least one node")

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature == LEAF

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.is_leaf))

    def node_depths(self) -> np.ndarray:
        depth = np.full(self.n_nodes, -1, dtype=np.int64)
        depth[0] = 0
        stack = [0]
        while stack:
            i = stack.pop()
            if self.feature[i] != LEAF:
                for c in (self.left[i], self.right[i]):
                    depth[c] = depth[i] + 1
                    stack.append(int(c))
        return depth

    @property
    def depth(self) -> int:
        return int(self.node_depths().max())

    def validate(self) -> None:
        """Check that the arrays describe one proper binary tree rooted at 0."""
        n = self.n_nodes
        internal = ~self.is_leaf
        kids = np.concatenate([self.left[internal], self.right[internal]])
        if np.any((kids <= 0) | (kids >= n)):
            raise ValueError("child index out of range")
        if np.any(self.left[~internal] != LEAF) or np.any(self.right[~internal] != LEAF):
            raise ValueError("leaf with children")
        if np.unique(kids).size != kids.size or kids.size != n - 1:
            raise ValueError("nodes do not form a binary tree")
        if np.any(self.node_depths() < 0):
            raise ValueError("unreachable node")

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of ``X`` (float32 comparisons)."""
        X = np.asarray(X, dtype=np.float32)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return node

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        """Number of comparisons made for each row."""
        return self.node_depths()[self.apply(X)]

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@dataclass
class TreeEnsemble:
    family: Family
    trees: list[Tree]
    n_classes: int
    n_features: int
    learning_rate: float = 0.1
    hyperparams: TreeHyperParams | None = None
    train_loss: list[float] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.family = Family(self.family)

    @property
    def max_depth(self) -> int:
        return max((t.depth for t in self.trees), default=0)

    def raw_scores(self, X) -> np.ndarray:
        X = _check_width(X, self.n_features)
        scores = np.zeros((X.shape[0], self.n_classes), dtype=np.float64)
        for t in self.trees:
            scores[:, t.class_tag] += t.predict_value(X)
        return scores

    def predict_proba(self, X) -> np.ndarray:
        X = _check_width(X, self.n_features)
        if self.family is Family.RF:
            votes = np.zeros((X.shape[0], self.n_classes), dtype=np.float64)
            rows = np.arange(X.shape[0])
            for t in self.trees:
                cls = t.predict_value(X).astype(np.int64)
                votes[rows, cls] += 1.0
            if not self.trees:
                return np.full_like(votes, 1.0 / self.n_classes)
            return votes / len(self.trees)
        return softmax(self.raw_scores(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


def _check_width(X, d):
    X = np.asarray(X, dtype=np.float32)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != d:
        raise ValueError(f"input has {X.shape[1]} features, ensemble expects {d}")
    return X


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict_ensemble(m: TreeEnsemble, x) -> np.ndarray:
    """Class probability vector for a single feature vector."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("predict_ensemble takes one feature vector")
    return m.predict_proba(x.reshape(1, -1))[0]


def count_comparisons(m: TreeEnsemble, x) -> int:
    """Exact number of internal-node comparisons executed for one input."""
    X = _check_width(np.asarray(x).reshape(1, -1), m.n_features)
    return int(sum(int(t.path_lengths(X)[0]) for t in m.trees))


def count_comparisons_batch(m: TreeEnsemble, X) -> np.ndarray:
    X = _check_width(X, m.n_features)
    total = np.zeros(X.shape[0], dtype=np.int64)
    for t in m.trees:
        total += t.path_lengths(X)
    return total
