"""Adam training with plateau learning-rate decay and early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..dataio import Dataset
from .model import CnnModel, cross_entropy, forward, loss_and_grads, trainable

log = logging.getLogger(__name__)

IMPROVEMENT_DELTA = 1e-4


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    initial_lr: float = 0.008
    batch_size: int = 2048
    plateau_decay_factor: float = 0.5
    plateau_patience: int = 5
    min_lr: float = 1e-5
    early_stop_patience: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if min(self.max_epochs, self.batch_size, self.plateau_patience, self.early_stop_patience) < 1:
            raise ValueError("epochs, batch size and patience values must be >= 1")
        if self.initial_lr <= 0 or self.min_lr <= 0 or not 0 < self.plateau_decay_factor < 1:
            raise ValueError("learning rates must be positive and the decay factor in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


class PlateauMonitor:
    """Tracks validation loss; decays the learning rate and signals early stopping.

    An epoch counts as an improvement when the loss drops more than
    ``delta`` below the best so far.
    """

    def __init__(self, cfg: TrainConfig, delta: float = IMPROVEMENT_DELTA):
        self.cfg = cfg
        self.delta = delta
        self.lr = cfg.initial_lr
        self.best = math.inf
        self.best_epoch = -1
        self.since_best = 0
        self.since_decay = 0

    def update(self, epoch: int, val_loss: float) -> tuple[bool, bool]:
        """Returns ``(improved, stop)``; may lower ``self.lr``."""
        if val_loss < self.best - self.delta:
            self.best = val_loss
            self.best_epoch = epoch
            self.since_best = 0
            self.since_decay = 0
            return True, False
        self.since_best += 1
        self.since_decay += 1
        if self.since_decay >= self.cfg.plateau_patience:
            self.lr = max(self.lr * self.cfg.plateau_decay_factor, self.cfg.min_lr)
            self.since_decay = 0
        return False, self.since_best >= self.cfg.early_stop_patience


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.b1, self.b2, self.eps = cfg.beta1, cfg.beta2, cfg.adam_eps
        self.m = {k: np.zeros_like(v) for k, v in params.items() if trainable(k)}
        self.v = {k: np.zeros_like(v) for k, v in params.items() if trainable(k)}
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k in self.m:
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            update = lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            params[k] -= update.astype(params[k].dtype)


def _xy(data: Dataset):
    return np.asarray(data.features, dtype=np.float32), np.asarray(data.labels)


def train(model: CnnModel, train: Dataset, val: Dataset, cfg: TrainConfig) -> tuple[CnnModel, History]:
    """Train a copy of ``model`` and return the weights with the best validation loss."""
    model = model.copy()
    X, y = _xy(train)
    Xv, yv = _xy(val)
    if y.size and (y.min() < 0 or y.max() >= model.arch.n_classes):
        raise ValueError("training labels out of range for the architecture")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.params, cfg)
    monitor = PlateauMonitor(cfg)
    hist = History()
    best = model.copy()
    n = y.size
    for epoch in range(cfg.max_epochs):
        lr = monitor.lr
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(model, X[idx], y[idx], rng=rng, update_stats=True)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            opt.step(model.params, grads, lr)
            total += loss * idx.size
        probs = forward(model, Xv, "infer") if yv.size else None
        val_loss = cross_entropy(probs, yv) if yv.size else total / max(n, 1)
        if not math.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        hist.train_loss.append(total / max(n, 1))
        hist.val_loss.append(val_loss)
        hist.val_accuracy.append(float((probs.argmax(1) == yv).mean()) if yv.size else math.nan)
        hist.lr.append(lr)
        improved, stop = monitor.update(epoch, val_loss)
        if improved:
            best = model.copy()
        if stop:
            hist.stopped_early = True
            break
    hist.best_epoch = monitor.best_epoch
    log.debug("trained %d epochs, best epoch %d val loss %.4f", len(hist.val_loss),
              monitor.best_epoch, monitor.best)
    return best, hist
