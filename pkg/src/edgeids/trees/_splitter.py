"""Exact split search by sorted scan over every candidate threshold."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

# cap on elements of one (rows, features, stats) cumulative block
_BLOCK_ELEMS = 1 << 21


class Split(NamedTuple):
    gain: float
    feature: int
    threshold: np.float32
    n_left: int


def _threshold_between(a: np.float32, b: np.float32) -> np.float32:
    mid = np.float32((np.float64(a) + np.float64(b)) / 2.0)
    return mid if mid < b else np.float32(a)


def gini_score(left: np.ndarray, total: np.ndarray, n_left: np.ndarray, n: int) -> np.ndarray:
    """Sum of squared class counts over child sizes; larger means purer children."""
    right = total - left
    return (left**2).sum(-1) / n_left + (right**2).sum(-1) / (n - n_left)


def newton_score(left: np.ndarray, total: np.ndarray, reg_lambda: float) -> np.ndarray:
    gl, hl = left[..., 0], left[..., 1]
    gr, hr = total[0] - gl, total[1] - hl
    return gl**2 / (hl + reg_lambda) + gr**2 / (hr + reg_lambda)


def find_best_split(
    X: np.ndarray,
    stats: np.ndarray,
    features: np.ndarray,
    min_child: int,
    criterion: str,
    reg_lambda: float = 1.0,
) -> Split | None:
    """Best split of one node's rows.

    ``X`` is the node's float32 feature block, ``stats`` its per-row
    statistics: one-hot class indicators for ``"gini"``, ``(grad, hess)``
    for ``"newton"``. Features must be given in ascending order; ties are
    broken by lowest feature index, then lowest threshold.
    """
    m = X.shape[0]
    lo, hi = min_child - 1, m - min_child
    if lo >= hi or features.size == 0:
        return None
    total = stats.sum(axis=0)
    n_left = np.arange(lo, hi, dtype=np.float64) + 1.0
    if criterion == "gini":
        parent = float((total**2).sum()) / m
    else:
        parent = float(total[0] ** 2 / (total[1] + reg_lambda))

    best_score, best = -np.inf, None
    chunk = max(1, _BLOCK_ELEMS // max(1, m * stats.shape[1]))
    for start in range(0, features.size, chunk):
        fs = features[start : start + chunk]
        xf = X[:, fs]
        order = np.argsort(xf, axis=0, kind="stable")
        xs = np.take_along_axis(xf, order, axis=0)
        cum = np.cumsum(stats[order], axis=0)[lo:hi]
        if criterion == "gini":
            score = gini_score(cum, total, n_left[:, None], m)
        else:
            score = newton_score(cum, total, reg_lambda)
        score = np.where(xs[lo:hi] < xs[lo + 1 : hi + 1], score, -np.inf)
        flat = score.T.ravel()
        j = int(np.argmax(flat))
        if flat[j] > best_score:
            best_score = float(flat[j])
            fi, pos = divmod(j, hi - lo)
            best = (int(fs[fi]), xs[lo + pos, fi], xs[lo + pos + 1, fi], lo + pos + 1)
    if best is None:
        return None
    feature, a, b, n_l = best
    gain = (best_score - parent) / m if criterion == "gini" else best_score - parent
    return Split(gain, feature, _threshold_between(a, b), n_l)
