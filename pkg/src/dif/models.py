"""Estimator-style front end over the deep forest and the baselines."""

from __future__ import annotations

from .forest import DeepForest, ForestConfig, build_forest
from .scoring import ScoreResult, score_dataset


class DeepIsolationForest:
    """Deep isolation forest detector.

    Keyword arguments are those of :class:`dif.forest.ForestConfig`;
    ``mode`` selects ``"deas"`` (default) or ``"path-only"`` scoring.
    Higher scores mean more anomalous.
    """

    def __init__(self, mode: str = "deas", threads: int = 1, **config):
        self.config = ForestConfig(**config)
        self.mode = mode
        self.threads = threads
        self.forest_: DeepForest | None = None

    @classmethod
    def from_forest(cls, forest: DeepForest, mode: str = "deas", threads: int = 1):
        obj = cls.__new__(cls)
        obj.config = forest.config
        obj.mode = mode
        obj.threads = threads
        obj.forest_ = forest
        return obj

    @property
    def n_features_(self) -> int:
        return self.forest_.input_dim

    def fit(self, data, network=None):
        self.forest_ = build_forest(data, self.config, network=network, threads=self.threads)
        return self

    def score(self, data) -> ScoreResult:
        if self.forest_ is None:
            raise RuntimeError("detector is not fitted")
        return score_dataset(self.forest_, data, self.mode, threads=self.threads)

    def score_samples(self, data):
        return self.score(data).scores
