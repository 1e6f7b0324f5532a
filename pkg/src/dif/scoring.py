"""Anomaly scores from tree traversals.

The depth factor ``2 ** (-mean_path / c(n))`` is the classic isolation
score. The deviation-enhanced score multiplies it by the mean, over trees,
of the per-decision average ``|x[j] - threshold|``; a traversal that takes
no decision contributes a deviation of zero.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import as_matrix
from .data import DataMatrix
from .errors import ConfigError, InputError, ShapeError
from .forest import DeepForest, TraversalRecord, traverse_many
from .representation import forward_ensemble

EULER_GAMMA = 0.5772156649
MODES = ("deas", "path-only")


def normalizer(n: int) -> float:
    """Average unsuccessful-search path length ``c(n)`` of a BST on ``n`` keys.

    ``c(1)`` is mathematically 0 but is returned as 1 so it can divide.
    """
    if n < 1:
        raise ConfigError(f"normalizer needs n >= 1, got {n}")
    if n <= 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


def leaf_adjustment(size: int) -> float:
    """Expected extra depth below a truncated leaf holding ``size`` objects."""
    return 0.0 if size <= 1 else normalizer(size)


def avg_deviation(rec: TraversalRecord) -> float:
    if rec.path_length == 0:
        return 0.0
    return rec.deviation_sum / rec.path_length


@dataclass(frozen=True)
class ScoreBreakdown:
    per_tree: tuple[TraversalRecord, ...]
    mean_path: float
    mean_deviation: float
    final_score: float


@dataclass(frozen=True)
class ScoreResult:
    """Per-object, per-tree traversal statistics for a scored dataset.

    ``path_lengths`` and ``deviation_sums`` have shape ``(N, T)``.
    """

    path_lengths: np.ndarray
    deviation_sums: np.ndarray
    subsample_size: int
    mode: str = "deas"

    @property
    def mean_path(self) -> np.ndarray:
        return self.path_lengths.mean(axis=1)

    @property
    def deviations(self) -> np.ndarray:
        """Per-tree average deviation, zero where the path is empty."""
        safe = np.maximum(self.path_lengths, 1)
        return np.where(self.path_lengths > 0, self.deviation_sums / safe, 0.0)

    @property
    def mean_deviation(self) -> np.ndarray:
        # fsum is exactly rounded, so tree order cannot change the result
        dev = self.deviations
        return np.array([math.fsum(row) for row in dev]) / dev.shape[1]

    @property
    def depth_factor(self) -> np.ndarray:
        return np.exp2(-self.mean_path / normalizer(self.subsample_size))

    @property
    def scores(self) -> np.ndarray:
        if self.mode == "path-only":
            return self.depth_factor
        return self.depth_factor * self.mean_deviation

    def breakdown(self, i: int) -> ScoreBreakdown:
        recs = tuple(TraversalRecord(int(l), float(b), k)
                     for k, (l, b) in enumerate(zip(self.path_lengths[i], self.deviation_sums[i])))
        return ScoreBreakdown(recs, float(self.mean_path[i]), float(self.mean_deviation[i]),
                              float(self.scores[i]))

    def __len__(self):
        return self.path_lengths.shape[0]


def _result_from_records(records: Sequence[TraversalRecord], subsample_size: int,
                         mode: str) -> ScoreResult:
    if not records:
        raise InputError("cannot score from an empty record list")
    lengths = np.array([[r.path_length for r in records]], dtype=np.int64)
    betas = np.array([[r.deviation_sum for r in records]], dtype=np.float64)
    return ScoreResult(lengths, betas, subsample_size, mode)


def deas_score(records: Sequence[TraversalRecord], subsample_size: int) -> ScoreBreakdown:
    res = _result_from_records(records, subsample_size, "deas")
    return ScoreBreakdown(tuple(records), float(res.mean_path[0]), float(res.mean_deviation[0]),
                          float(res.scores[0]))


def iforest_score(records: Sequence[TraversalRecord], subsample_size: int) -> float:
    return float(_result_from_records(records, subsample_size, "path-only").scores[0])


def path_score(mean_path, subsample_size: int):
    """``2 ** (-mean_path / c(n))``, elementwise."""
    return np.exp2(-np.asarray(mean_path, dtype=np.float64) / normalizer(subsample_size))


def score_dataset(forest: DeepForest, data, mode: str = "deas", threads: int = 1) -> ScoreResult:
    """Standardise with the training statistics, project and traverse every tree."""
    if mode not in MODES:
        raise ConfigError(f"unknown scoring mode {mode!r}; expected one of {MODES}")
    x = data.values if isinstance(data, DataMatrix) else as_matrix(data, "data")
    if x.shape[1] != forest.input_dim:
        raise ShapeError(f"model expects {forest.input_dim} features, data has {x.shape[1]}")
    if x.shape[0] == 0:
        raise InputError("cannot score an empty dataset")
    z = forest.training_stats.transform(x)
    reps = forward_ensemble(forest.network, z, forest.config.batch_size, threads=threads)
    n_trees = len(forest.trees)
    lengths = np.empty((x.shape[0], n_trees), dtype=np.int64)
    betas = np.empty((x.shape[0], n_trees))

    def run(k):
        tree = forest.trees[k]
        lengths[:, k], betas[:, k] = traverse_many(tree, reps[tree.representation_index])

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(run, range(n_trees)))
    else:
        for k in range(n_trees):
            run(k)
    return ScoreResult(lengths, betas, forest.subsample_size, mode)
