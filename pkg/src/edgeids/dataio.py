"""Tabular traffic datasets: CSV loading, cleaning, scaling, and stratified splits."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features

MISSING_MARKERS = frozenset({"", "NaN", "nan"})


class DataError(ValueError):
    """Raised when input data cannot be parsed or violates a precondition."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with integer labels.

    ``labels`` uses -1 for rows whose label cell was missing; such rows are
    dropped by :func:`clean`.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError("labels length does not match number of rows")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != X.shape[1]:
            raise DataError("feature_names length does not match feature count")
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise DataError(f"duplicate feature names: {dup}")
        classes = tuple(str(c) for c in self.class_names)
        if y.size and (y.max() >= len(classes) or y.min() < -1):
            raise DataError("label id out of range for class_names")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "class_names", classes)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.labels[rows], self.feature_names, self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0], minlength=self.n_classes)


@dataclass(frozen=True)
class ScalerParams:
    feature_names: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=np.float64)
        maxs = np.asarray(self.maxs, dtype=np.float64)
        if mins.shape != maxs.shape or mins.shape != (len(self.feature_names),):
            raise DataError("scaler mins/maxs must match feature_names length")
        if np.any(mins > maxs):
            raise DataError("scaler min exceeds max")
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "mins", _frozen(mins))
        object.__setattr__(self, "maxs", _frozen(maxs))

    def transform(self, X) -> np.ndarray:
        """Scale with the recorded ranges, clamping unseen values into [0, 1]."""
        X = np.asarray(X, dtype=np.float64)
        span = self.maxs - self.mins
        safe = np.where(span > 0, span, 1.0)
        out = (X - self.mins) / safe
        out = np.where(span > 0, out, 0.0)
        return np.clip(out, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "mins": self.mins.tolist(),
            "maxs": self.maxs.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ScalerParams":
        return cls(tuple(doc["feature_names"]), doc["mins"], doc["maxs"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "ScalerParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray = field(repr=False)

    def folds(self):
        """Yield ``(train_idx, test_idx)`` for each fold."""
        for f in range(self.k):
            test = np.flatnonzero(self.assignments == f)
            train = np.flatnonzero(self.assignments != f)
            yield train, test


def load_csv(path, label_column: str) -> Dataset:
    """Load a header-bearing CSV. Class names are the sorted distinct label strings."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            dup = sorted({h for h in header if header.count(h) > 1})
            raise DataError(f"{path}: duplicate column names {dup}")
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not found")
        li = header.index(label_column)
        feat_cols = [i for i in range(len(header)) if i != li]
        rows: list[list[float]] = []
        raw_labels: list[str | None] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}"
                )
            vals = []
            for i in feat_cols:
                cell = row[i].strip()
                if cell in MISSING_MARKERS:
                    vals.append(math.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno} column {header[i]!r}: not numeric: {cell!r}"
                    ) from None
            rows.append(vals)
            lab = row[li].strip()
            raw_labels.append(None if lab in MISSING_MARKERS else lab)
    class_names = tuple(sorted({lab for lab in raw_labels if lab is not None}))
    index = {c: i for i, c in enumerate(class_names)}
    labels = np.array([-1 if lab is None else index[lab] for lab in raw_labels], dtype=np.int64)
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(feat_cols))
    return Dataset(X, labels, tuple(header[i] for i in feat_cols), class_names)


def save_csv(d: Dataset, path, label_column: str = "label") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*d.feature_names, label_column])
        for x, y in zip(d.features, d.labels):
            w.writerow([*(repr(float(v)) for v in x), d.class_names[y] if y >= 0 else ""])


def clean(d: Dataset) -> Dataset:
    """Drop rows with missing cells, then exact duplicate (row, label) pairs."""
    ok = ~np.isnan(d.features).any(axis=1) & (d.labels >= 0)
    seen = set()
    keep = []
    for i in np.flatnonzero(ok):
        key = (d.features[i].tobytes(), int(d.labels[i]))
        if key not in seen:
            seen.add(key)
            keep.append(i)
    if not keep:
        raise DataError("no rows remain after cleaning")
    return d.subset(np.array(keep, dtype=np.int64))


def minmax_scale(d: Dataset) -> tuple[Dataset, ScalerParams]:
    params = ScalerParams(d.feature_names, d.features.min(axis=0), d.features.max(axis=0))
    scaled = Dataset(params.transform(d.features), d.labels, d.feature_names, d.class_names)
    return scaled, params


def _largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(quotas).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        # stable sort keeps lower class id first among equal remainders
        order = np.argsort(-(quotas - base), kind="stable")
        base[order[:short]] += 1
    return base


def stratified_split(d: Dataset, holdout_frac: float, seed: int) -> tuple[Dataset, Dataset]:
    """Split into (train, val) keeping per-class proportions."""
    if not 0.0 < holdout_frac < 1.0:
        raise DataError("holdout_frac must lie in (0, 1)")
    counts = d.class_counts()
    for c, n in enumerate(counts):
        if n == 1:
            raise DataError(f"class {d.class_names[c]!r} has a single row; cannot stratify")
    rng = np.random.default_rng(seed)
    total = int(math.floor(d.n_rows * holdout_frac + 0.5))
    n_val = np.minimum(_largest_remainder(counts * holdout_frac, total), np.maximum(counts - 1, 0))
    val_idx = []
    for c in range(d.n_classes):
        rows = np.flatnonzero(d.labels == c)
        rng.shuffle(rows)
        val_idx.append(rows[: n_val[c]])
    val_idx = np.sort(np.concatenate(val_idx)) if val_idx else np.array([], dtype=np.int64)
    mask = np.zeros(d.n_rows, dtype=bool)
    mask[val_idx] = True
    return d.subset(np.flatnonzero(~mask)), d.subset(val_idx)


def stratified_kfold(d: Dataset, k: int, seed: int) -> FoldPlan:
    if k < 2:
        raise DataError("k must be at least 2")
    counts = d.class_counts()
    for c, n in enumerate(counts):
        if 0 < n < k:
            raise DataError(f"class {d.class_names[c]!r} has {n} rows, fewer than k={k}")
    rng = np.random.default_rng(seed)
    assign = np.full(d.n_rows, -1, dtype=np.int64)
    offset = 0
    for c in range(d.n_classes):
        rows = np.flatnonzero(d.labels == c)
        rng.shuffle(rows)
        assign[rows] = (offset + np.arange(rows.size)) % k
        offset += rows.size
    return FoldPlan(k, _frozen(assign))


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"label out of range for {n_classes} classes")
    out = np.zeros((labels.size, n_classes), dtype=np.float64)
    out[np.arange(labels.size), labels] = 1.0
    return out


def remap_classes(d: Dataset, mapping: Mapping[str, str]) -> Dataset:
    """Collapse class names through ``mapping`` (e.g. 15 attack labels to 6 categories)."""
    missing = [c for c in d.class_names if c not in mapping]
    if missing:
        raise DataError(f"class mapping lacks entries for {missing}")
    new_names = tuple(sorted(set(mapping[c] for c in d.class_names)))
    index = {c: i for i, c in enumerate(new_names)}
    lut = np.array([index[mapping[c]] for c in d.class_names] + [-1], dtype=np.int64)
    return Dataset(d.features, lut[d.labels], d.feature_names, new_names)


def select_features(d: Dataset, names: Sequence[str]) -> Dataset:
    """Reorder/subset columns by name."""
    pos = {n: i for i, n in enumerate(d.feature_names)}
    missing = [n for n in names if n not in pos]
    if missing:
        raise DataError(f"dataset lacks features {missing}")
    cols = [pos[n] for n in names]
    return Dataset(d.features[:, cols], d.labels, tuple(names), d.class_names)


class MinMaxClampScaler(TransformerMixin, BaseEstimator):
    """Min-max scaler whose ``transform`` clamps to [0, 1] and zeroes constant columns."""

    def fit(self, X, y=None):
        names = getattr(X, "columns", None)
        X = check_features(X, allow_nan=False)
        self.n_features_in_ = X.shape[1]
        names = tuple(names) if names is not None else tuple(f"f{i}" for i in range(X.shape[1]))
        self.params_ = ScalerParams(names, X.min(axis=0), X.max(axis=0))
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_features(X, n_features=self.n_features_in_)
        return self.params_.transform(X)
