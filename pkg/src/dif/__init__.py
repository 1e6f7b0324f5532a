"""Deep isolation forest anomaly detection with random representation ensembles."""

from .baselines import ExtendedIsolationForest, IsolationForest
from .config import RunConfig
from .core import RngStream
from .metrics import aii, auc_pr, auc_roc
from .models import DeepIsolationForest

__all__ = [
    "DeepIsolationForest",
    "ExtendedIsolationForest",
    "IsolationForest",
    "RngStream",
    "RunConfig",
    "aii",
    "auc_pr",
    "auc_roc",
]
