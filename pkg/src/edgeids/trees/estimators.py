"""scikit-learn compatible wrappers around the tree trainers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_features, check_labels, check_seed
from ..dataio import Dataset
from .params import Family, TreeHyperParams
from .training import train_gbdt, train_random_forest


class _BaseTreeClassifier(ClassifierMixin, BaseEstimator):
    _family: Family

    def _hyperparams(self) -> TreeHyperParams:
        raise NotImplementedError

    def fit(self, X, y):
        X = check_features(X)
        y = check_labels(y, X.shape[0])
        self.classes_, codes = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        data = Dataset(X, codes, tuple(f"f{i}" for i in range(X.shape[1])),
                       tuple(str(c) for c in self.classes_))
        hp = self._hyperparams()
        seed = check_seed(self.random_state)
        if hp.family is Family.RF:
            self.ensemble_ = train_random_forest(data, hp, seed)
        else:
            self.ensemble_ = train_gbdt(data, hp, seed)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "ensemble_")
        X = check_features(X, n_features=self.n_features_in_)
        return self.ensemble_.predict_proba(X)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def hardware_profile(self):
        from ..hwcost import profile_tree_ensemble

        check_is_fitted(self, "ensemble_")
        return profile_tree_ensemble(self.ensemble_)


class ForestClassifier(_BaseTreeClassifier):
    """Random forest of hard-voting Gini trees.

    Examples
    --------
    >>> import numpy as np
    >>> X = np.array([[0., 0.], [0., 1.], [1., 0.], [1., 1.]])
    >>> clf = ForestClassifier(n_trees=5, max_depth=2, min_child_size=1).fit(X, [0, 1, 1, 0])
    >>> clf.predict_proba(X).shape
    (4, 2)
    """

    def __init__(self, n_trees=10, max_depth=5, min_child_size=5, colsample=1.0,
                 subsample=1.0, random_state=None):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_child_size = min_child_size
        self.colsample = colsample
        self.subsample = subsample
        self.random_state = random_state

    def _hyperparams(self):
        return TreeHyperParams(Family.RF, self.n_trees, self.max_depth, self.min_child_size,
                               self.colsample, self.subsample)


class BoostedTreesClassifier(_BaseTreeClassifier):
    """Softmax gradient-boosted trees, grown leaf-wise or level-wise."""

    def __init__(self, n_trees=10, max_depth=5, min_child_size=5, colsample=1.0,
                 subsample=1.0, num_leaves=31, growth="leafwise", learning_rate=0.1,
                 reg_lambda=1.0, random_state=None):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_child_size = min_child_size
        self.colsample = colsample
        self.subsample = subsample
        self.num_leaves = num_leaves
        self.growth = growth
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda
        self.random_state = random_state

    def _hyperparams(self):
        family = {"leafwise": Family.GBDT_LEAFWISE, "levelwise": Family.GBDT_LEVELWISE}.get(self.growth)
        if family is None:
            raise ValueError(f"growth must be 'leafwise' or 'levelwise', got {self.growth!r}")
        return TreeHyperParams(family, self.n_trees, self.max_depth, self.min_child_size,
                               self.colsample, self.subsample, self.num_leaves,
                               self.learning_rate, self.reg_lambda)
