"""Random forest and gradient-boosted decision trees with exact split search."""

from ._tree import (
    Tree,
    TreeEnsemble,
    count_comparisons,
    count_comparisons_batch,
    predict_ensemble,
)
from .estimators import BoostedTreesClassifier, ForestClassifier
from .params import Family, TreeHyperParams
from .training import train_ensemble, train_gbdt, train_random_forest

__all__ = [
    "BoostedTreesClassifier",
    "Family",
    "ForestClassifier",
    "Tree",
    "TreeEnsemble",
    "TreeHyperParams",
    "count_comparisons",
    "count_comparisons_batch",
    "predict_ensemble",
    "train_ensemble",
    "train_gbdt",
    "train_random_forest",
]
