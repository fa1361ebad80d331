"""Budget-constrained grid search for trees and evolutionary HW-NAS for CNNs."""

from .grid import GridSearchResult, GridSpace, constrained_grid_search, enumerate_grid
from .nas import (
    CnnTrainer,
    NasConfig,
    NasResult,
    NasSpace,
    evolve,
    mutate,
    random_arch,
)
from .results import (
    EVALUATED,
    REJECTED,
    CandidateResult,
    EventLog,
    NoFeasibleCandidate,
)

__all__ = [
    "EVALUATED",
    "REJECTED",
    "CandidateResult",
    "CnnTrainer",
    "EventLog",
    "GridSearchResult",
    "GridSpace",
    "NasConfig",
    "NasResult",
    "NasSpace",
    "NoFeasibleCandidate",
    "constrained_grid_search",
    "enumerate_grid",
    "evolve",
    "mutate",
    "random_arch",
]
