"""scikit-learn compatible 1D-CNN classifier."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_features, check_labels, check_seed
from ..dataio import Dataset, stratified_split
from .arch import CnnArch, CnnBlock
from .model import forward, init_model
from .train import TrainConfig, train


class Cnn1DClassifier(ClassifierMixin, BaseEstimator):
    """Block-wise 1D-CNN over a feature vector treated as a 1-channel sequence.

    ``blocks`` is a sequence of :class:`CnnBlock` (or dicts of their fields).
    A stratified ``validation_fraction`` of the training rows drives LR decay,
    early stopping and best-weight selection.
    """

    def __init__(self, blocks=None, validation_fraction=0.2, max_epochs=100, initial_lr=0.008,
                 batch_size=2048, plateau_patience=5, early_stop_patience=10, random_state=None):
        self.blocks = blocks
        self.validation_fraction = validation_fraction
        self.max_epochs = max_epochs
        self.initial_lr = initial_lr
        self.batch_size = batch_size
        self.plateau_patience = plateau_patience
        self.early_stop_patience = early_stop_patience
        self.random_state = random_state

    def _arch(self, d, k) -> CnnArch:
        blocks = self.blocks if self.blocks is not None else [CnnBlock(16, 3)]
        blocks = [b if isinstance(b, CnnBlock) else CnnBlock(**b) for b in blocks]
        return CnnArch(tuple(blocks), d, k)

    def fit(self, X, y):
        X = check_features(X)
        y = check_labels(y, X.shape[0])
        self.classes_, codes = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        seed = check_seed(self.random_state)
        data = Dataset(X, codes, tuple(f"f{i}" for i in range(X.shape[1])),
                       tuple(str(c) for c in self.classes_))
        tr, val = stratified_split(data, self.validation_fraction, seed)
        cfg = TrainConfig(max_epochs=self.max_epochs, initial_lr=self.initial_lr,
                          batch_size=self.batch_size, plateau_patience=self.plateau_patience,
                          early_stop_patience=self.early_stop_patience, seed=seed)
        arch = self._arch(X.shape[1], len(self.classes_))
        self.model_, self.history_ = train(init_model(arch, seed), tr, val, cfg)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_features(X, n_features=self.n_features_in_)
        return forward(self.model_, X, "infer")

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def hardware_profile(self):
        from ..hwcost import profile_cnn

        check_is_fitted(self, "model_")
        return profile_cnn(self.model_.arch)
