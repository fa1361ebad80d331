"""Block-wise 1D-CNNs: architecture, numpy forward/backward, Adam training."""

from ..metrics import EvalReport, evaluate
from .arch import CnnArch, CnnBlock, GeometryError, shape_trace
from .estimator import Cnn1DClassifier
from .gradcheck import gradient_check
from .model import CnnModel, forward, init_model
from .train import History, PlateauMonitor, TrainConfig, TrainingError, train

__all__ = [
    "Cnn1DClassifier",
    "CnnArch",
    "CnnBlock",
    "CnnModel",
    "EvalReport",
    "GeometryError",
    "History",
    "PlateauMonitor",
    "TrainConfig",
    "TrainingError",
    "evaluate",
    "forward",
    "gradient_check",
    "init_model",
    "shape_trace",
    "train",
]
